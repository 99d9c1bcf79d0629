#pragma once

#include "geosteer/encoder/model.hpp"
#include "geosteer/geom/pca.hpp"
#include "geosteer/spline/cubic_spline.hpp"
#include "geosteer/synth/head.hpp"

#include <memory>
#include <optional>

namespace geosteer::metric {

enum class MetricKind { flat, spline_fff, encoder_pullback, analytical };

inline std::string to_string(MetricKind k) {
  switch (k) {
    case MetricKind::flat: return "flat";
    case MetricKind::spline_fff: return "spline-fff";
    case MetricKind::encoder_pullback: return "encoder-pullback";
    case MetricKind::analytical: return "analytical";
  }
  return "?";
}

inline constexpr double kDefaultEpsilon = 1e-3;

/// Lift of low-dimensional waypoints into the head's ambient space: the
/// waypoint replaces the carrier's centred principal coordinates.
struct SubspaceLift {
  geom::PcaModel pca;
  Vector carrier;

  Vector lift(const Vector& u) const { return geom::subspace_replace_centered(carrier, u, pca); }
};

/// Metric G(h) = J(h)^T J(h) + eps I, held as the factor J(h) and eps.
/// Values are immutable and safe to share across threads.
class MetricField {
public:
  static MetricField flat(Index ambient, double eps = kDefaultEpsilon) {
    MetricField m(MetricKind::flat, ambient, eps);
    return m;
  }

  /// First fundamental form of a spline: the unit tangent at the nearest
  /// table parameter. Points farther than `tube` from the table are rejected;
  /// a negative tube selects twice the largest table spacing.
  static MetricField spline(std::shared_ptr<const spline::CubicSpline> s, double eps = kDefaultEpsilon,
                            double tube = -1.0) {
    require(s != nullptr, "MetricField::spline: null spline");
    MetricField m(MetricKind::spline_fff, s->dim(), eps);
    if (tube < 0.0) {
      const Matrix& t = s->table_points();
      double gap = 0.0;
      for (Index j = 1; j < t.rows(); ++j) gap = std::max(gap, (t.row(j) - t.row(j - 1)).norm());
      tube = 2.0 * gap;
    }
    m.spline_ = std::move(s);
    m.tube_ = tube;
    return m;
  }

  static MetricField encoder(std::shared_ptr<const encoder::EncoderModel> model, double eps = kDefaultEpsilon) {
    require(model != nullptr, "MetricField::encoder: null model");
    MetricField m(MetricKind::encoder_pullback, model->ambient_dim(), eps);
    m.model_ = std::move(model);
    return m;
  }

  /// Pullback of the head's Hellinger coordinates. With a lift, points are
  /// centred principal coordinates completed by one fixed carrier.
  static MetricField analytical(std::shared_ptr<const synth::BehaviorHead> head, double eps = kDefaultEpsilon,
                                std::optional<SubspaceLift> lift = std::nullopt) {
    require(head != nullptr, "MetricField::analytical: null head");
    Index ambient = head->ambient_dim();
    if (lift) {
      require(lift->pca.dim() == head->ambient_dim() && lift->carrier.size() == head->ambient_dim(),
              "MetricField::analytical: lift does not match the head's dimension");
      ambient = lift->pca.rank();
    }
    MetricField m(MetricKind::analytical, ambient, eps);
    m.head_ = std::move(head);
    m.lift_ = std::move(lift);
    return m;
  }

  MetricKind kind() const { return kind_; }
  Index ambient_dim() const { return ambient_; }
  double epsilon() const { return eps_; }

  /// J(h), m x ambient.
  Matrix jacobian_factor(const Vector& h) const {
    require(h.size() == ambient_, "jacobian_factor: point has dimension " + std::to_string(h.size()) +
                                      ", metric expects " + std::to_string(ambient_));
    switch (kind_) {
      case MetricKind::flat: return Matrix::Identity(ambient_, ambient_);
      case MetricKind::spline_fff: {
        const auto p = spline_->nearest_parameter(h);
        require(p.distance <= tube_, "jacobian_factor: point is " + std::to_string(p.distance) +
                                         " from the spline, outside the tube " + std::to_string(tube_));
        const Vector d = spline_->derivative(p.u);
        const double n = d.norm();
        return n > 0.0 ? Matrix(d.transpose() / n) : Matrix(Matrix::Zero(1, ambient_));
      }
      case MetricKind::encoder_pullback: return model_->jacobian(h);
      case MetricKind::analytical:
        if (lift_) return head_->sqrt_jacobian(lift_->lift(h)) * lift_->pca.components.transpose();
        return head_->sqrt_jacobian(h);
    }
    return {};
  }

  /// q(h, v) = ||J(h) v||^2 + eps ||v||^2.
  double apply(const Vector& h, const Vector& v) const {
    require(v.size() == ambient_, "metric_apply: vector dimension mismatch");
    if (kind_ == MetricKind::flat) {
      require(h.size() == ambient_, "metric_apply: point dimension mismatch");
      return (1.0 + eps_) * v.squaredNorm();
    }
    return (jacobian_factor(h) * v).squaredNorm() + eps_ * v.squaredNorm();
  }

private:
  MetricField(MetricKind kind, Index ambient, double eps) : kind_(kind), ambient_(ambient), eps_(eps) {
    require(ambient >= 1, "MetricField: ambient dimension must be positive");
    require(eps >= 0.0 && std::isfinite(eps), "MetricField: epsilon must be finite and non-negative");
  }

  MetricKind kind_;
  Index ambient_;
  double eps_;
  double tube_ = 0.0;
  std::shared_ptr<const spline::CubicSpline> spline_;
  std::shared_ptr<const encoder::EncoderModel> model_;
  std::shared_ptr<const synth::BehaviorHead> head_;
  std::optional<SubspaceLift> lift_;
};

inline Matrix jacobian_factor(const MetricField& m, const Vector& h) { return m.jacobian_factor(h); }
inline double metric_apply(const MetricField& m, const Vector& h, const Vector& v) { return m.apply(h, v); }

}  // namespace geosteer::metric
