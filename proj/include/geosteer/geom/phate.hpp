#pragma once

#include "geosteer/geom/distance_matrix.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

namespace geosteer::geom {

struct PhateOptions {
  std::size_t knn = 15;
  std::optional<int> t;  // unset: chosen from the von Neumann entropy knee
  int max_t = 64;
  double bandwidth_floor = 1e-8;
  double potential_floor = 1e-12;
  std::size_t max_points = 5000;
};

struct DiffusionTime {
  int t = 1;
  bool flagged = false;        // entropy curve was flat, t = 1 is a fallback
  std::vector<double> entropy;  // H(1) .. H(max_t)
};

/// Von Neumann entropy of the spectrum raised to the power t.
inline double von_neumann_entropy(const Vector& abs_eigenvalues, int t) {
  Vector p = abs_eigenvalues.array().pow(static_cast<double>(t)).matrix();
  const double s = p.sum();
  if (s <= 0.0) return 0.0;
  p /= s;
  double h = 0.0;
  for (Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  return h;
}

/// Knee of H(t) over t = 1..max_t, taken as the argmax of the discrete second
/// difference H(t-1) - 2H(t) + H(t+1). A flat curve yields t = 1, flagged.
inline DiffusionTime select_diffusion_time(const Vector& eigenvalues, int max_t = 64) {
  require(max_t >= 3, "select_diffusion_time: need max_t >= 3");
  require((eigenvalues.array().abs() <= 1.0 + 1e-9).all(), "select_diffusion_time: eigenvalues outside [-1, 1]");
  // Sorting makes the result independent of the eigenvalue order.
  Vector lam = eigenvalues.cwiseAbs();
  std::sort(lam.data(), lam.data() + lam.size());
  DiffusionTime out;
  out.entropy.resize(static_cast<std::size_t>(max_t));
  for (int t = 1; t <= max_t; ++t) out.entropy[static_cast<std::size_t>(t - 1)] = von_neumann_entropy(lam, t);
  const auto [lo, hi] = std::minmax_element(out.entropy.begin(), out.entropy.end());
  if (*hi - *lo <= 1e-12) {
    out.t = 1;
    out.flagged = true;
    return out;
  }
  double best = -std::numeric_limits<double>::infinity();
  for (int t = 2; t < max_t; ++t) {
    const auto k = static_cast<std::size_t>(t - 1);
    const double d2 = out.entropy[k - 1] - 2.0 * out.entropy[k] + out.entropy[k + 1];
    if (d2 > best) best = d2, out.t = t;
  }
  return out;
}

struct PhateResult {
  DistanceMatrix distances;
  DiffusionTime time;
  Matrix transition;  // row-stochastic, before powering
};

namespace detail {

inline Matrix row_normalize_l2(const Matrix& x) {
  Matrix out = x;
  for (Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

inline std::vector<std::vector<Index>> connected_components(const Matrix& affinity) {
  const Index n = affinity.rows();
  std::vector<Index> comp(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<Index>> comps;
  for (Index s = 0; s < n; ++s) {
    if (comp[static_cast<std::size_t>(s)] >= 0) continue;
    comps.emplace_back();
    std::vector<Index> stack{s};
    comp[static_cast<std::size_t>(s)] = static_cast<Index>(comps.size() - 1);
    while (!stack.empty()) {
      const Index u = stack.back();
      stack.pop_back();
      comps.back().push_back(u);
      for (Index v = 0; v < n; ++v)
        if (affinity(u, v) > 0.0 && comp[static_cast<std::size_t>(v)] < 0) {
          comp[static_cast<std::size_t>(v)] = comp[static_cast<std::size_t>(s)];
          stack.push_back(v);
        }
    }
  }
  return comps;
}

// P^t by repeated squaring.
inline Matrix matrix_power(const Matrix& p, int t) {
  Matrix result;
  Matrix base = p;
  bool empty = true;
  while (t > 0) {
    if (t & 1) {
      result = empty ? base : Matrix(result * base);
      empty = false;
    }
    t >>= 1;
    if (t > 0) base = base * base;
  }
  return result;
}

}  // namespace detail

/// Symmetric adaptive-bandwidth Gaussian affinity on L2-normalized rows.
/// Bandwidth of row i is the distance to its knn-th neighbour; every point
/// within that radius is a neighbour.
inline Matrix phate_affinity(const Matrix& points, std::size_t knn, double bandwidth_floor = 1e-8) {
  const Index n = points.rows();
  require(n >= static_cast<Index>(knn) + 1, "phate: need n >= knn + 1 (n = " + std::to_string(n) +
                                                 ", knn = " + std::to_string(knn) + ")");
  require(knn >= 1, "phate: knn must be at least 1");
  const Matrix x = detail::row_normalize_l2(points);
  const Matrix d = pairwise_euclidean(x);
  Matrix k = Matrix::Zero(n, n);
  std::vector<double> row(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = d(i, j);
    row[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();  // exclude self
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(knn - 1), row.end());
    const double sigma = std::max(row[knn - 1], bandwidth_floor);
    for (Index j = 0; j < n; ++j)
      if (j == i || d(i, j) <= sigma) k(i, j) = std::exp(-std::pow(d(i, j) / sigma, 2));
  }
  return 0.5 * (k + k.transpose());
}

/// PHATE diffusion-potential distances.
inline PhateResult phate_diffusion(const Matrix& points, const PhateOptions& opts = {}) {
  const Index n = points.rows();
  require(static_cast<std::size_t>(n) <= opts.max_points,
          "phate: " + std::to_string(n) + " points exceed the dense limit of " + std::to_string(opts.max_points));
  require(points.allFinite(), "phate: non-finite input");
  const Matrix k = phate_affinity(points, opts.knn, opts.bandwidth_floor);

  const auto comps = detail::connected_components(k);
  if (comps.size() > 1) {
    std::string report = "phate: kNN graph is disconnected into " + std::to_string(comps.size()) + " components (sizes";
    for (std::size_t c = 0; c < comps.size() && c < 10; ++c) report += " " + std::to_string(comps[c].size());
    if (comps.size() > 10) report += " ...";
    throw ContractViolation(report + ")");
  }

  const Vector degree = k.rowwise().sum();
  Matrix p = k;
  for (Index i = 0; i < n; ++i) p.row(i) /= degree[i];

  DiffusionTime time;
  if (opts.t) {
    require(*opts.t >= 1, "phate: diffusion time must be at least 1");
    time.t = *opts.t;
  } else {
    // Spectrum of P through its symmetric conjugate D^-1/2 K D^-1/2.
    const Vector inv_sqrt = degree.cwiseSqrt().cwiseInverse();
    const Matrix a = inv_sqrt.asDiagonal() * k * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    Vector lam = eig.eigenvalues().cwiseMax(-1.0).cwiseMin(1.0);
    time = select_diffusion_time(lam, opts.max_t);
  }

  const Matrix pt = detail::matrix_power(p, time.t);
  Matrix potential = (-pt.cwiseMax(opts.potential_floor).array().log()).matrix();

  // Exact-duplicate inputs have identical rows of P^t in exact arithmetic;
  // copy them so blocked products cannot leave rounding differences.
  const Matrix x = detail::row_normalize_l2(points);
  std::map<std::vector<double>, Index> first;
  for (Index i = 0; i < n; ++i) {
    std::vector<double> key(x.row(i).data(), x.row(i).data() + x.cols());
    auto [it, inserted] = first.emplace(std::move(key), i);
    if (!inserted) potential.row(i) = potential.row(it->second);
  }

  return {DistanceMatrix(pairwise_euclidean(potential), DistanceSource::phate), std::move(time), std::move(p)};
}

inline DistanceMatrix phate_distances(const Matrix& points, const PhateOptions& opts = {}) {
  return phate_diffusion(points, opts).distances;
}

}  // namespace geosteer::geom
