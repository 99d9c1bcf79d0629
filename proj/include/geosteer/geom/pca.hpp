#pragma once

#include "geosteer/diffcore/matrix.hpp"

#include <Eigen/Eigenvalues>

namespace geosteer::geom {

/// Principal subspace with orthonormal component rows.
struct PcaModel {
  Vector mean;                 // D
  Matrix components;           // m x D, orthonormal rows, by decreasing variance
  Vector explained_variance;   // m

  Index dim() const { return components.cols(); }
  Index rank() const { return components.rows(); }

  /// P (h - mean)
  Vector project(const Vector& h) const {
    require(h.size() == dim(), "PcaModel::project: expected dimension " + std::to_string(dim()));
    return components * (h - mean);
  }

  /// P^T u + mean
  Vector lift(const Vector& u) const {
    require(u.size() == rank(), "PcaModel::lift: expected dimension " + std::to_string(rank()));
    return components.transpose() * u + mean;
  }

  Matrix project_rows(const Matrix& h) const {
    require(h.cols() == dim(), "PcaModel::project_rows: dimension mismatch");
    return (h.rowwise() - mean.transpose()) * components.transpose();
  }

  Matrix lift_rows(const Matrix& u) const {
    require(u.cols() == rank(), "PcaModel::lift_rows: dimension mismatch");
    return (u * components).rowwise() + mean.transpose();
  }
};

/// Covariance eigen-decomposition keeping the top m components. Each
/// component is signed so its largest-magnitude entry is positive.
inline PcaModel fit_pca(const Matrix& points, Index m) {
  const Index n = points.rows(), d = points.cols();
  require(m >= 1 && m <= std::min(n, d), "fit_pca: m = " + std::to_string(m) + " exceeds min(n, D) = " +
                                             std::to_string(std::min(n, d)));
  require(n >= 2, "fit_pca: need at least two points");
  PcaModel model;
  model.mean = points.colwise().mean().transpose();
  const Matrix centered = points.rowwise() - model.mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("fit_pca: eigen-decomposition failed");
  model.components.resize(m, d);
  model.explained_variance.resize(m);
  for (Index k = 0; k < m; ++k) {
    const Index src = d - 1 - k;  // eigenvalues come in ascending order
    Vector v = eig.eigenvectors().col(src);
    Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    model.components.row(k) = v.transpose();
    model.explained_variance[k] = std::max(0.0, eig.eigenvalues()[src]);
  }
  return model;
}

/// h + P^T (waypoint - P h): replaces the in-subspace coordinates of h.
///
/// Uses the un-centred projection so the identity P h_inj = waypoint holds
/// for coordinates expressed as P h. Waypoints in centred coordinates should
/// go through subspace_replace_centered.
inline Vector subspace_replace(const Vector& h_orig, const Vector& waypoint, const Matrix& components) {
  require(h_orig.size() == components.cols() && waypoint.size() == components.rows(),
          "subspace_replace: shape mismatch");
  return h_orig + components.transpose() * (waypoint - components * h_orig);
}

/// Variant with waypoints in the model's centred coordinates (project()).
inline Vector subspace_replace_centered(const Vector& h_orig, const Vector& waypoint, const PcaModel& pca) {
  require(h_orig.size() == pca.dim() && waypoint.size() == pca.rank(), "subspace_replace: shape mismatch");
  return h_orig + pca.components.transpose() * (waypoint - pca.project(h_orig));
}

}  // namespace geosteer::geom
