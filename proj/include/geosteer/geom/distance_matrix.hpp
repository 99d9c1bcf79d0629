#pragma once

#include "geosteer/diffcore/matrix.hpp"
#include "geosteer/synth/head.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace geosteer::geom {

enum class DistanceSource { phate, output_hellinger, ground_truth };

inline std::string to_string(DistanceSource s) {
  switch (s) {
    case DistanceSource::phate: return "phate";
    case DistanceSource::output_hellinger: return "output-hellinger";
    case DistanceSource::ground_truth: return "ground-truth";
  }
  return "?";
}

inline DistanceSource distance_source_from_string(const std::string& s) {
  if (s == "phate") return DistanceSource::phate;
  if (s == "output-hellinger") return DistanceSource::output_hellinger;
  if (s == "ground-truth") return DistanceSource::ground_truth;
  throw ContractViolation("unknown distance source '" + s + "'");
}

/// Square, symmetric, zero-diagonal, non-negative matrix of pairwise distances.
class DistanceMatrix {
public:
  DistanceMatrix() = default;
  DistanceMatrix(Matrix values, DistanceSource source) : values_(std::move(values)), source_(source) { validate(); }

  const Matrix& values() const { return values_; }
  DistanceSource source() const { return source_; }
  Index size() const { return values_.rows(); }
  double operator()(Index i, Index j) const { return values_(i, j); }

  /// Dense sub-matrix for the given index set (rows and columns).
  Matrix slice(const std::vector<std::size_t>& idx) const {
    const auto m = static_cast<Index>(idx.size());
    Matrix out(m, m);
    for (Index a = 0; a < m; ++a)
      for (Index b = 0; b < m; ++b) out(a, b) = values_(static_cast<Index>(idx[a]), static_cast<Index>(idx[b]));
    return out;
  }

private:
  void validate() const {
    require(values_.rows() == values_.cols(), "DistanceMatrix: not square (" + shape_str(values_) + ")");
    require(values_.allFinite(), "DistanceMatrix: non-finite entry");
    for (Index i = 0; i < values_.rows(); ++i) {
      require(values_(i, i) == 0.0, "DistanceMatrix: non-zero diagonal at " + std::to_string(i));
      for (Index j = 0; j < i; ++j) {
        require(values_(i, j) >= 0.0, "DistanceMatrix: negative entry");
        require(std::abs(values_(i, j) - values_(j, i)) <= 1e-12, "DistanceMatrix: asymmetric at (" +
                                                                      std::to_string(i) + ", " + std::to_string(j) + ")");
      }
    }
  }

  Matrix values_;
  DistanceSource source_ = DistanceSource::ground_truth;
};

/// Pairwise Euclidean distances between rows, computed by explicit differences
/// so identical rows give exactly 0 and (i, j) equals (j, i) bit for bit.
inline Matrix pairwise_euclidean(const Matrix& x) {
  const Index n = x.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).norm();
  return d;
}

/// Pairwise Hellinger distances between head outputs: the supervision target
/// for output-distance encoders.
inline DistanceMatrix output_hellinger_matrix(const Matrix& points, const synth::BehaviorHead& head) {
  const Matrix roots = head.eval_rows(points).cwiseSqrt();
  Matrix d = pairwise_euclidean(roots) / std::numbers::sqrt2;
  d = d.cwiseMin(1.0);
  return DistanceMatrix(std::move(d), DistanceSource::output_hellinger);
}

}  // namespace geosteer::geom
