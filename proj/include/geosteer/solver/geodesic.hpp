#pragma once

#include "geosteer/diffcore/lbfgs.hpp"
#include "geosteer/metricspace/metric_field.hpp"
#include "geosteer/solver/path.hpp"

#include <optional>

namespace geosteer::solver {

inline constexpr Index kDefaultWaypoints = 50;

inline void require_endpoints(const Vector& h0, const Vector& h1, const char* who) {
  require(h0.size() == h1.size() && h0.size() >= 1, std::string(who) + ": endpoint dimensions differ");
  require(h0.allFinite() && h1.allFinite(), std::string(who) + ": non-finite endpoint");
}

/// Uniform samples of the chord; the endpoints are copied exactly.
inline GeodesicPath linear_geodesic(const Vector& h0, const Vector& h1, Index k = kDefaultWaypoints) {
  require_waypoint_count(k);
  require_endpoints(h0, h1, "linear_geodesic");
  GeodesicPath path;
  path.solver = "closed-form";
  path.waypoints.resize(k + 1, h0.size());
  const Vector delta = h1 - h0;
  for (Index w = 0; w <= k; ++w)
    path.waypoints.row(w) = (h0 + delta * (static_cast<double>(w) / static_cast<double>(k))).transpose();
  path.waypoints.row(0) = h0.transpose();
  path.waypoints.row(k) = h1.transpose();
  return path;
}

/// Factor J(pi_k) for the start point of every segment.
inline std::vector<Matrix> segment_factors(const Matrix& waypoints, const metric::MetricField& m) {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(waypoints.rows() - 1));
  for (Index k = 0; k + 1 < waypoints.rows(); ++k) out.push_back(m.jacobian_factor(row_vector(waypoints, k)));
  return out;
}

/// sum_k sqrt(||J_k d_k||^2 + eps ||d_k||^2) with the factors held fixed.
/// Writes the gradient with respect to every waypoint row when `grad` is
/// given; zero-length segments contribute a zero subgradient.
inline double frozen_length(const Matrix& waypoints, const std::vector<Matrix>& factors, double eps,
                            Matrix* grad = nullptr) {
  if (grad) grad->setZero(waypoints.rows(), waypoints.cols());
  double total = 0.0;
  for (Index k = 0; k + 1 < waypoints.rows(); ++k) {
    const RowVector d = waypoints.row(k + 1) - waypoints.row(k);
    const Vector jd = factors[static_cast<std::size_t>(k)] * d.transpose();
    const double seg = std::sqrt(jd.squaredNorm() + eps * d.squaredNorm());
    total += seg;
    if (grad && seg > 0.0) {
      const RowVector g = (factors[static_cast<std::size_t>(k)].transpose() * jd).transpose() + eps * d;
      grad->row(k + 1) += g / seg;
      grad->row(k) -= g / seg;
    }
  }
  return total;
}

/// Discrete path length under the metric.
inline double discrete_length(const GeodesicPath& path, const metric::MetricField& m) {
  require(path.waypoints.rows() >= 2, "discrete_length: path needs at least two waypoints");
  require(path.dim() == m.ambient_dim(), "discrete_length: path dimension " + std::to_string(path.dim()) +
                                             " differs from metric dimension " + std::to_string(m.ambient_dim()));
  return frozen_length(path.waypoints, segment_factors(path.waypoints, m), m.epsilon());
}

struct LbfgsGeodesicOptions {
  Index waypoints = kDefaultWaypoints;
  diff::LbfgsOptions lbfgs{};     // max_iter bounds the outer iterations
  int backtracks = 12;            // step halvings before a refresh is given up
  std::optional<Matrix> initial;  // (K+1) x D start path; default the chord
};

/// Free-waypoint geodesic with the freeze-metric approximation. Each outer
/// iteration fixes J at the current waypoints and takes one L-BFGS step on
/// the interior waypoints. The step is halved until the length under the
/// refreshed metric does not increase (dropping the curvature history), so
/// the length trace never increases.
inline GeodesicPath lbfgs_geodesic(const Vector& h0, const Vector& h1, const metric::MetricField& m,
                                   const LbfgsGeodesicOptions& opts = {}) {
  const Index k = opts.waypoints;
  require_waypoint_count(k);
  require_endpoints(h0, h1, "lbfgs_geodesic");
  require(h0.size() == m.ambient_dim(), "lbfgs_geodesic: endpoint dimension " + std::to_string(h0.size()) +
                                            " differs from metric dimension " + std::to_string(m.ambient_dim()));
  require(opts.backtracks >= 0, "lbfgs_geodesic: negative backtrack count");
  GeodesicPath path = linear_geodesic(h0, h1, k);
  path.solver = "lbfgs";
  if (h0 == h1) {
    path.note = "degenerate: identical endpoints";
    path.length_trace.push_back(0.0);
    return path;
  }
  if (opts.initial) {
    require(opts.initial->rows() == k + 1 && opts.initial->cols() == h0.size() && opts.initial->allFinite(),
            "lbfgs_geodesic: initial path has the wrong shape or is not finite");
    path.waypoints.middleRows(1, k - 1) = opts.initial->middleRows(1, k - 1);
  }
  if (k == 1) {
    path.length_trace.push_back(discrete_length(path, m));
    return path;
  }

  const Index dim = h0.size(), interior = k - 1;
  Matrix current = path.waypoints;
  auto unpack = [&](const Vector& x) {
    Matrix w = current;
    w.middleRows(1, interior) = Eigen::Map<const Matrix>(x.data(), dim, interior).transpose();
    return w;
  };
  auto pack = [&](const Matrix& w) {
    const Matrix t = w.middleRows(1, interior).transpose();
    return Vector(Eigen::Map<const Vector>(t.data(), t.size()));
  };

  std::vector<Matrix> factors = segment_factors(current, m);
  auto objective = [&](const Vector& x, Vector& g) {
    Matrix grad;
    const double f = frozen_length(unpack(x), factors, m.epsilon(), &grad);
    const Matrix gi = grad.middleRows(1, interior).transpose();
    g = Eigen::Map<const Vector>(gi.data(), gi.size());
    return f;
  };

  diff::Lbfgs opt(pack(current), opts.lbfgs);
  double length = frozen_length(current, factors, m.epsilon());
  path.length_trace.push_back(length);
  try {
    for (int it = 0; it < opts.lbfgs.max_iter; ++it) {
      opt.reevaluate(objective);
      const int steps_before = opt.iterations();
      const diff::LbfgsStatus status = opt.iterate(objective);
      if (status == diff::LbfgsStatus::line_search_failed) {
        // After progress this is the precision floor; before any, a failure.
        path.flagged = path.length_trace.size() == 1;
        path.note = "line search failed at outer iteration " + std::to_string(it);
        break;
      }
      const Matrix step = unpack(opt.x()) - current;
      if (opt.iterations() == steps_before || step.cwiseAbs().maxCoeff() == 0.0) break;
      bool accepted = false;
      double scale = 1.0, change = 0.0;
      for (int b = 0; b <= opts.backtracks && !accepted; ++b, scale *= 0.5) {
        const Matrix next = current + scale * step;
        std::vector<Matrix> next_factors = segment_factors(next, m);
        const double next_length = frozen_length(next, next_factors, m.epsilon());
        if (next_length <= length) {
          accepted = true;
          change = length - next_length;
          current = next;
          factors = std::move(next_factors);
          length = next_length;
          path.length_trace.push_back(length);
          if (scale < 1.0) opt.restart(pack(current));
        }
      }
      if (!accepted) {
        path.note = "stopped: no step lowers the refreshed length at outer iteration " + std::to_string(it);
        break;
      }
      if (status != diff::LbfgsStatus::running || change < opts.lbfgs.tolerance_change) break;
    }
  } catch (const NumericError& e) {
    path.flagged = true;
    path.note = std::string("optimizer failure: ") + e.what();
  }
  path.waypoints = current;
  path.waypoints.row(0) = h0.transpose();
  path.waypoints.row(k) = h1.transpose();
  return path;
}

}  // namespace geosteer::solver
