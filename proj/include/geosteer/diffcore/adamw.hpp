#pragma once

#include "geosteer/diffcore/matrix.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace geosteer::diff {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// AdamW with decoupled weight decay and bias-corrected moments, following
/// the update order of torch.optim.AdamW.
class AdamW {
public:
  explicit AdamW(AdamWOptions opts = {}) : opts_(opts) {}

  /// Updates every parameter in place. First call fixes the shapes.
  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads, double lr) {
    require(params.size() == grads.size(), "AdamW::step: parameter/gradient count mismatch");
    require(lr >= 0.0, "AdamW::step: negative learning rate");
    if (m_.empty()) {
      for (const Matrix* p : params) {
        m_.push_back(Matrix::Zero(p->rows(), p->cols()));
        v_.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
    }
    require(m_.size() == params.size(), "AdamW::step: parameter count changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    const double bc2_sqrt = std::sqrt(bc2);
    const double step_size = lr / bc1;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix& p = *params[i];
      const Matrix& g = *grads[i];
      require(same_shape(p, g) && same_shape(p, m_[i]),
              "AdamW::step: shape mismatch for parameter " + std::to_string(i));
      p *= 1.0 - lr * opts_.weight_decay;
      m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g;
      v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * g.cwiseProduct(g);
      const Matrix denom = ((v_[i].array().sqrt() / bc2_sqrt) + opts_.eps).matrix();
      p.array() -= step_size * m_[i].array() / denom.array();
    }
  }

  long steps() const { return t_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

private:
  AdamWOptions opts_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

/// Linear ramp from 0 to `base` over the first warmup_fraction * total steps,
/// then cosine decay reaching 0 at `total`.
inline double warmup_cosine_lr(long step, long total, double base, double warmup_fraction = 0.05) {
  require(total > 0, "warmup_cosine_lr: total must be positive");
  require(step >= 0 && step <= total, "warmup_cosine_lr: step outside [0, total]");
  require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, "warmup_cosine_lr: warmup fraction outside [0, 1)");
  const double s = static_cast<double>(step);
  const double warm = warmup_fraction * static_cast<double>(total);
  if (s < warm) return base * s / warm;
  const double span = static_cast<double>(total) - warm;
  const double progress = (s - warm) / span;
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace geosteer::diff
