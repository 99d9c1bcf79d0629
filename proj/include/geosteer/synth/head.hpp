#pragma once

#include "geosteer/diffcore/matrix.hpp"

#include <cmath>

namespace geosteer::synth {

/// Stand-in for the rest-of-network map: a softmax over negative squared
/// distances to K class anchors, plus one constant "other" logit.
///
/// Output index K is the "other" bin.
class BehaviorHead {
public:
  BehaviorHead() = default;
  BehaviorHead(Matrix anchors, double temperature = 0.5, double other_logit = -4.0)
      : anchors_(std::move(anchors)), temperature_(temperature), other_logit_(other_logit) {
    require(anchors_.rows() >= 2, "BehaviorHead: need at least two anchors");
    require(temperature_ > 0.0, "BehaviorHead: temperature must be positive");
    require(anchors_.allFinite() && std::isfinite(other_logit_), "BehaviorHead: non-finite parameters");
  }

  Index classes() const { return anchors_.rows(); }
  Index outputs() const { return anchors_.rows() + 1; }
  Index ambient_dim() const { return anchors_.cols(); }
  const Matrix& anchors() const { return anchors_; }
  double temperature() const { return temperature_; }
  double other_logit() const { return other_logit_; }

  Vector logits(const Vector& h) const {
    check_point(h);
    Vector l(outputs());
    for (Index c = 0; c < classes(); ++c) l[c] = -(h - anchors_.row(c).transpose()).squaredNorm() / temperature_;
    l[classes()] = other_logit_;
    return l;
  }

  /// Output distribution over the K classes and the "other" bin.
  Vector eval(const Vector& h) const { return softmax(logits(h)); }

  /// Row-wise eval over a batch of points.
  Matrix eval_rows(const Matrix& points) const {
    Matrix out(points.rows(), outputs());
    for (Index i = 0; i < points.rows(); ++i) out.row(i) = eval(points.row(i).transpose()).transpose();
    return out;
  }

  /// Jacobian of h -> sqrt(eval(h)), shape (K+1) x D.
  ///
  /// With p = softmax(l), d sqrt(p_i) = (sqrt(p_i)/2) (dl_i - sum_j p_j dl_j),
  /// and dl_c/dh = -2 (h - a_c) / temperature for class logits.
  Matrix sqrt_jacobian(const Vector& h) const {
    const Vector p = eval(h);
    const Index k = classes();
    Matrix dl = Matrix::Zero(outputs(), ambient_dim());
    for (Index c = 0; c < k; ++c) dl.row(c) = (-2.0 / temperature_) * (h.transpose() - anchors_.row(c));
    const RowVector mean_dl = p.transpose() * dl;
    Matrix jac(outputs(), ambient_dim());
    for (Index i = 0; i < outputs(); ++i) jac.row(i) = 0.5 * std::sqrt(p[i]) * (dl.row(i) - mean_dl);
    return jac;
  }

  /// Shifted logits are floored at -708 so every output stays a positive
  /// normal double, however far h lies from the anchors.
  static Vector softmax(const Vector& l) {
    const double m = l.maxCoeff();
    Vector e = exp_elementwise((l.array() - m).cwiseMax(-708.0)).matrix();
    return e / e.sum();
  }

private:
  void check_point(const Vector& h) const {
    require(h.size() == ambient_dim(), "BehaviorHead: point has dimension " + std::to_string(h.size()) +
                                           ", expected " + std::to_string(ambient_dim()));
  }

  Matrix anchors_;
  double temperature_ = 0.5;
  double other_logit_ = -4.0;
};

}  // namespace geosteer::synth
