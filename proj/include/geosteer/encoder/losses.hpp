#pragma once

#include "geosteer/encoder/model.hpp"
#include "geosteer/synth/head.hpp"

#include <cmath>

namespace geosteer::encoder {

// ------------------------------------------------------------ graph losses

/// Pairwise latent distances from the Gram matrix. The squared distances are
/// clamped at 0 and offset by 1e-12 so sqrt stays differentiable on the
/// diagonal.
inline diff::Var pairwise_distances(diff::Var z) {
  diff::Var sq = diff::row_squared_norm(z);                       // B x 1
  diff::Var gram = diff::matmul(z, z, /*transpose_b=*/true);       // B x B
  diff::Var d2 = diff::add(diff::add(diff::scale(gram, -2.0), sq), diff::transpose(sq));
  return diff::sqrt(diff::add_scalar(diff::relu(d2), 1e-12));
}

/// Weight exp(-alpha d) off the diagonal, 0 on it, normalized by the number
/// of ordered pairs.
inline Matrix pair_weights(const Matrix& target, double alpha) {
  const Index b = target.rows();
  Matrix w = exp_elementwise(-alpha * target.array()).matrix();
  w.diagonal().setZero();
  return w / static_cast<double>(b * (b - 1));
}

/// Mean over ordered pairs i != j of (||z_i - z_j|| - d_ij)^2 exp(-alpha d_ij).
inline diff::Var loss_dist(diff::Var z, const Matrix& target, double alpha) {
  require(z.rows() >= 2, "loss_dist: batch must hold at least two points");
  require(target.rows() == z.rows() && target.cols() == z.rows(),
          "loss_dist: target is " + shape_str(target) + ", batch is " + std::to_string(z.rows()));
  diff::Graph& g = *z.graph();
  diff::Var resid = diff::sub(pairwise_distances(z), g.constant(target));
  return diff::sum(diff::mul(diff::square(resid), g.constant(pair_weights(target, alpha))));
}

/// Mean over rows of the squared row difference.
inline diff::Var mean_row_squared_error(diff::Var a, diff::Var b) {
  return diff::scale(diff::squared_norm(diff::sub(a, b)), 1.0 / static_cast<double>(a.rows()));
}

/// Square roots of head outputs restricted to the K class entries and
/// renormalized: the pointwise target rows.
inline Matrix pointwise_targets(const Matrix& outputs, Index classes) {
  require(outputs.cols() == classes + 1, "pointwise_targets: expected K + 1 output columns");
  Matrix q = outputs.leftCols(classes);
  for (Index r = 0; r < q.rows(); ++r) q.row(r) /= q.row(r).sum();
  return q.cwiseSqrt();
}

/// Mean over rows of ||sqrt softmax(z / zeta) - root_target||^2.
inline diff::Var loss_pointwise(diff::Var z, const Matrix& root_targets, double zeta) {
  require(z.cols() == root_targets.cols(), "loss_pointwise: latent dimension " + std::to_string(z.cols()) +
                                               " differs from class count " + std::to_string(root_targets.cols()));
  require(z.rows() == root_targets.rows(), "loss_pointwise: batch/target row mismatch");
  diff::Graph& g = *z.graph();
  return mean_row_squared_error(diff::sqrt(diff::softmax_rows(z, zeta)), g.constant(root_targets));
}

// ------------------------------------------------------- inference values

/// Pairwise distances by explicit differences.
inline Matrix latent_distances(const Matrix& z) {
  const Index n = z.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (z.row(i) - z.row(j)).norm();
  return d;
}

inline double loss_dist_value(const Matrix& z, const Matrix& target, double alpha) {
  require(z.rows() >= 2 && target.rows() == z.rows() && target.cols() == z.rows(), "loss_dist: shape mismatch");
  const Matrix resid = latent_distances(z) - target;
  return (resid.array().square() * pair_weights(target, alpha).array()).sum();
}

inline double loss_recon_value(const EncoderModel& m, const Matrix& x) {
  return (m.decode_rows(m.encode_rows(x)) - x).squaredNorm() / static_cast<double>(x.rows());
}

inline double loss_cycle_value(const EncoderModel& m, const Matrix& x) {
  const Matrix z = m.encode_rows(x);
  return (m.encode_rows(m.decode_rows(z)) - z).squaredNorm() / static_cast<double>(x.rows());
}

inline double loss_pointwise_value(const Matrix& z, const Matrix& root_targets, double zeta) {
  require(z.cols() == root_targets.cols(), "loss_pointwise: latent dimension differs from class count");
  double total = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    const Vector p = synth::BehaviorHead::softmax(z.row(r).transpose() / zeta);
    total += (p.cwiseSqrt() - root_targets.row(r).transpose()).squaredNorm();
  }
  return total / static_cast<double>(z.rows());
}

}  // namespace geosteer::encoder
