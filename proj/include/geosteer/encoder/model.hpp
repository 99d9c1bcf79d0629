#pragma once

#include "geosteer/diffcore/graph.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace geosteer::encoder {

enum class Supervision { phate, output_hellinger, vanilla };

inline std::string to_string(Supervision s) {
  switch (s) {
    case Supervision::phate: return "phate";
    case Supervision::output_hellinger: return "output-hellinger";
    case Supervision::vanilla: return "vanilla";
  }
  return "?";
}

inline Supervision supervision_from_string(const std::string& s) {
  if (s == "phate") return Supervision::phate;
  if (s == "output-hellinger") return Supervision::output_hellinger;
  if (s == "vanilla") return Supervision::vanilla;
  throw ContractViolation("unknown supervision '" + s + "'");
}

/// Affine layer y = x W + b on row batches; weight is in x out.
struct Dense {
  Matrix weight;
  Matrix bias;  // 1 x out

  Index in() const { return weight.rows(); }
  Index out() const { return weight.cols(); }
};

/// Per-feature normalization with learned scale/shift and running statistics.
struct Norm {
  Matrix gamma;  // 1 x features
  Matrix beta;   // 1 x features
  RowVector running_mean;
  RowVector running_var;

  /// Inference-mode per-feature multiplier gamma / sqrt(var + eps).
  RowVector scale(double eps) const {
    return (gamma.row(0).array() / (running_var.array() + eps).sqrt()).matrix();
  }
};

/// Linear layers with normalization + ReLU after every hidden layer; the
/// last layer is a plain affine map.
struct Mlp {
  std::vector<Dense> layers;
  std::vector<Norm> norms;  // layers.size() - 1
  double eps = 1e-5;
  double momentum = 0.1;

  Index in_dim() const { return layers.front().in(); }
  Index out_dim() const { return layers.back().out(); }

  /// Inference forward pass (running statistics, no state change).
  Matrix forward(const Matrix& x) const {
    require(x.cols() == in_dim(), "Mlp::forward: expected " + std::to_string(in_dim()) + " inputs, got " +
                                      std::to_string(x.cols()));
    Matrix a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Matrix z = (a * layers[l].weight).rowwise() + layers[l].bias.row(0);
      if (l + 1 < layers.size()) {
        const Norm& n = norms[l];
        z = ((z.rowwise() - n.running_mean).array().rowwise() * n.scale(eps).array()).rowwise() + n.beta.row(0).array();
        z = z.cwiseMax(0.0);
      }
      a = std::move(z);
    }
    return a;
  }

  /// Exact Jacobian (out x in) of the inference map at x. ReLU derivative is
  /// 0 at 0; `at_kink` reports whether any pre-activation was exactly 0.
  Matrix jacobian(const Vector& x, bool* at_kink = nullptr) const {
    require(x.size() == in_dim(), "Mlp::jacobian: dimension mismatch");
    std::vector<RowVector> gains;  // d a_l / d z_l, folded with the norm scale
    RowVector a = x.transpose();
    bool kink = false;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      RowVector z = a * layers[l].weight + layers[l].bias.row(0);
      const Norm& n = norms[l];
      const RowVector s = n.scale(eps);
      RowVector pre = ((z - n.running_mean).array() * s.array()).matrix() + n.beta.row(0);
      RowVector gain(pre.size());
      for (Index j = 0; j < pre.size(); ++j) {
        kink = kink || pre[j] == 0.0;
        gain[j] = pre[j] > 0.0 ? s[j] : 0.0;
      }
      gains.push_back(std::move(gain));
      a = pre.cwiseMax(0.0);
    }
    if (at_kink) *at_kink = kink;
    Matrix j = layers.back().weight.transpose();
    for (std::size_t l = layers.size() - 1; l-- > 0;)
      j = (j.array().rowwise() * gains[l].array()).matrix() * layers[l].weight.transpose();
    return j;
  }

  /// Parameters in declaration order: (weight, bias) per layer, then
  /// (gamma, beta) per norm.
  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> out;
    for (auto& d : layers) out.insert(out.end(), {&d.weight, &d.bias});
    for (auto& n : norms) out.insert(out.end(), {&n.gamma, &n.beta});
    return out;
  }
};

/// Uniform(-1/sqrt(in), 1/sqrt(in)) weights and biases; unit scale, zero shift.
inline Mlp make_mlp(const std::vector<Index>& widths, std::mt19937_64& rng) {
  require(widths.size() >= 2, "make_mlp: need at least input and output widths");
  Mlp m;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Index in = widths[l], out = widths[l + 1];
    require(in >= 1 && out >= 1, "make_mlp: widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Dense d{Matrix(in, out), Matrix(1, out)};
    for (Index i = 0; i < d.weight.size(); ++i) d.weight.data()[i] = u(rng);
    for (Index i = 0; i < out; ++i) d.bias(0, i) = u(rng);
    m.layers.push_back(std::move(d));
    if (l + 2 < widths.size())
      m.norms.push_back(Norm{Matrix::Ones(1, out), Matrix::Zero(1, out), RowVector::Zero(out), RowVector::Ones(out)});
  }
  return m;
}

/// Graph handles for one Mlp's parameters during a training step.
struct MlpVars {
  std::vector<diff::Var> weight, bias, gamma, beta;
};

inline MlpVars bind(diff::Graph& g, const Mlp& m) {
  MlpVars v;
  for (const auto& d : m.layers) {
    v.weight.push_back(g.parameter(d.weight));
    v.bias.push_back(g.parameter(d.bias));
  }
  for (const auto& n : m.norms) {
    v.gamma.push_back(g.parameter(n.gamma));
    v.beta.push_back(g.parameter(n.beta));
  }
  return v;
}

/// Gradients in the order of Mlp::parameters().
inline std::vector<const Matrix*> gradients(const MlpVars& v) {
  std::vector<const Matrix*> out;
  for (std::size_t l = 0; l < v.weight.size(); ++l) out.insert(out.end(), {&v.weight[l].grad(), &v.bias[l].grad()});
  for (std::size_t l = 0; l < v.gamma.size(); ++l) out.insert(out.end(), {&v.gamma[l].grad(), &v.beta[l].grad()});
  return out;
}

/// Training-mode forward pass using batch statistics. Batch statistics per
/// norm are appended to `stats` when given.
inline diff::Var forward_train(const Mlp& m, const MlpVars& v, diff::Var x,
                               std::vector<diff::NormalizationOut>* stats = nullptr) {
  diff::Var a = x;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    diff::Var z = diff::add(diff::matmul(a, v.weight[l]), v.bias[l]);
    if (l + 1 < m.layers.size()) {
      auto bn = diff::batch_norm(z, v.gamma[l], v.beta[l], m.eps);
      if (stats) stats->push_back(bn);
      z = diff::relu(bn.y);
    }
    a = z;
  }
  return a;
}

/// Running-statistic update; the running variance uses the unbiased batch
/// variance.
inline void update_running(Mlp& m, const std::vector<diff::NormalizationOut>& stats, Index batch) {
  require(stats.size() == m.norms.size(), "update_running: statistic count mismatch");
  const double unbias = static_cast<double>(batch) / static_cast<double>(batch - 1);
  for (std::size_t l = 0; l < stats.size(); ++l) {
    Norm& n = m.norms[l];
    n.running_mean = (1.0 - m.momentum) * n.running_mean + m.momentum * stats[l].batch_mean;
    n.running_var = (1.0 - m.momentum) * n.running_var + m.momentum * unbias * stats[l].batch_var;
  }
}

/// Encoder/decoder pair. The encoder maps ambient rows to k latents.
struct EncoderModel {
  Mlp encoder;
  Mlp decoder;
  Supervision supervision = Supervision::phate;
  std::string ambient = "raw";  // "raw" or "pca-<m>"

  Index ambient_dim() const { return encoder.in_dim(); }
  Index latent_dim() const { return encoder.out_dim(); }

  Vector encode(const Vector& h) const { return encoder.forward(h.transpose()).transpose(); }
  Matrix encode_rows(const Matrix& h) const { return encoder.forward(h); }
  Vector decode(const Vector& z) const { return decoder.forward(z.transpose()).transpose(); }
  Matrix decode_rows(const Matrix& z) const { return decoder.forward(z); }

  /// k x ambient Jacobian of the inference-mode encoder.
  Matrix jacobian(const Vector& h, bool* at_kink = nullptr) const { return encoder.jacobian(h, at_kink); }
};

/// Hidden widths for an ambient dimension: [512, 256, 128], with a leading
/// 1024 layer when the ambient dimension exceeds 1024.
inline std::vector<Index> hidden_widths(Index ambient) {
  std::vector<Index> w;
  if (ambient > 1024) w.push_back(1024);
  w.insert(w.end(), {512, 256, 128});
  return w;
}

inline EncoderModel make_encoder_model(Index ambient, Index latent, const std::vector<Index>& hidden,
                                       std::uint64_t seed) {
  require(ambient >= 1 && latent >= 1, "make_encoder_model: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::vector<Index> enc{ambient};
  enc.insert(enc.end(), hidden.begin(), hidden.end());
  enc.push_back(latent);
  const std::vector<Index> dec(enc.rbegin(), enc.rend());
  EncoderModel m;
  m.encoder = make_mlp(enc, rng);
  m.decoder = make_mlp(dec, rng);
  return m;
}

}  // namespace geosteer::encoder
