#pragma once

#include "geosteer/diffcore/matrix.hpp"
#include "geosteer/solver/path.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace geosteer::spline {

enum class Boundary { natural, periodic };

inline std::string to_string(Boundary b) { return b == Boundary::natural ? "natural" : "periodic"; }

enum class CoincidentKnots { reject, allow };

/// Interpolating cubic spline with uniform knot parameters. Knot k sits at
/// u = k; a periodic spline closes back to knot 0 at u = n.
class CubicSpline {
public:
  static constexpr Index kTablePoints = 2048;

  CubicSpline() = default;

  CubicSpline(Matrix knots, Boundary boundary, CoincidentKnots coincident = CoincidentKnots::reject)
      : knots_(std::move(knots)), boundary_(boundary) {
    const Index n = knots_.rows();
    require(n >= 3, "fit_cubic_spline: need at least 3 knots, got " + std::to_string(n));
    require(boundary_ == Boundary::natural || n >= 4,
            "fit_cubic_spline: periodic spline needs at least 4 knots, got " + std::to_string(n));
    require(knots_.allFinite(), "fit_cubic_spline: non-finite knot");
    if (coincident == CoincidentKnots::reject) {
      const Index last = boundary_ == Boundary::periodic ? n : n - 1;
      for (Index k = 0; k < last; ++k)
        require((knots_.row((k + 1) % n) - knots_.row(k)).squaredNorm() > 0.0,
                "fit_cubic_spline: coincident adjacent knots " + std::to_string(k) + " and " +
                    std::to_string((k + 1) % n));
    }
    solve_second_derivatives();
    build_arc_table();
  }

  Boundary boundary() const { return boundary_; }
  const Matrix& knots() const { return knots_; }
  Index knot_count() const { return knots_.rows(); }
  Index dim() const { return knots_.cols(); }
  Index segment_count() const { return boundary_ == Boundary::periodic ? knots_.rows() : knots_.rows() - 1; }
  /// Parameter domain is [0, domain()].
  double domain() const { return static_cast<double>(segment_count()); }

  Vector eval(double u) const {
    const auto [i, t] = locate(u);
    const Index j = (i + 1) % knots_.rows();
    const double a = 1.0 - t;
    return (a * knots_.row(i) + t * knots_.row(j) + ((a * a * a - a) / 6.0) * second_.row(i) +
            ((t * t * t - t) / 6.0) * second_.row(j))
        .transpose();
  }

  /// ds/du, the tangent of the curve.
  Vector derivative(double u) const {
    const auto [i, t] = locate(u);
    const Index j = (i + 1) % knots_.rows();
    const double a = 1.0 - t;
    return (knots_.row(j) - knots_.row(i) - ((3.0 * a * a - 1.0) / 6.0) * second_.row(i) +
            ((3.0 * t * t - 1.0) / 6.0) * second_.row(j))
        .transpose();
  }

  Vector second_derivative(double u) const {
    const auto [i, t] = locate(u);
    const Index j = (i + 1) % knots_.rows();
    return ((1.0 - t) * second_.row(i) + t * second_.row(j)).transpose();
  }

  double total_length() const { return cumulative_.back(); }

  /// Arc length from u = 0 to u.
  double arc_length_at(double u) const {
    u = wrap(u);
    const double pos = u / step_;
    const auto lo = std::min(static_cast<std::size_t>(pos), cumulative_.size() - 2);
    const double frac = pos - static_cast<double>(lo);
    return cumulative_[lo] + frac * (cumulative_[lo + 1] - cumulative_[lo]);
  }

  /// Inverse of arc_length_at by linear interpolation in the dense table.
  double parameter_at_arc(double s) const {
    s = std::clamp(s, 0.0, total_length());
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    const auto hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - cumulative_.begin(), 1,
                                                                        static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
    const std::size_t lo = hi - 1;
    const double span = cumulative_[hi] - cumulative_[lo];
    const double frac = span > 0.0 ? (s - cumulative_[lo]) / span : 0.0;
    return (static_cast<double>(lo) + frac) * step_;
  }

  /// Dense samples of the curve at the table parameters.
  const Matrix& table_points() const { return table_points_; }
  double table_parameter(Index j) const { return static_cast<double>(j) * step_; }

  struct Projection {
    double u = 0.0;
    double distance = 0.0;
  };

  /// Nearest dense-table point to h.
  Projection nearest_parameter(const Vector& h) const {
    require(h.size() == dim(), "nearest_parameter: dimension mismatch");
    Index best = 0;
    (table_points_.rowwise() - h.transpose()).rowwise().squaredNorm().minCoeff(&best);
    return {table_parameter(best), (table_points_.row(best) - h.transpose()).norm()};
  }

private:
  struct Location {
    Index segment;
    double t;
  };

  double wrap(double u) const {
    require(std::isfinite(u), "spline: non-finite parameter");
    if (boundary_ == Boundary::natural) {
      require(u >= 0.0 && u <= domain(), "spline: parameter " + std::to_string(u) + " outside [0, " +
                                             std::to_string(domain()) + "]");
      return u;
    }
    const double period = domain();
    double w = std::fmod(u, period);
    if (w < 0.0) w += period;
    return w;
  }

  Location locate(double u) const {
    u = wrap(u);
    const Index i = std::min(static_cast<Index>(std::floor(u)), segment_count() - 1);
    return {i, u - static_cast<double>(i)};
  }

  // Unit knot spacing: M[k-1] + 4 M[k] + M[k+1] = 6 (y[k+1] - 2 y[k] + y[k-1]).
  void solve_second_derivatives() {
    const Index n = knots_.rows();
    second_ = Matrix::Zero(n, knots_.cols());
    if (boundary_ == Boundary::natural) {
      const Index m = n - 2;
      Matrix a = Matrix::Zero(m, m);
      Matrix rhs(m, knots_.cols());
      for (Index r = 0; r < m; ++r) {
        const Index k = r + 1;
        a(r, r) = 4.0;
        if (r > 0) a(r, r - 1) = 1.0;
        if (r + 1 < m) a(r, r + 1) = 1.0;
        rhs.row(r) = 6.0 * (knots_.row(k + 1) - 2.0 * knots_.row(k) + knots_.row(k - 1));
      }
      second_.middleRows(1, m) = Eigen::PartialPivLU<Matrix>(a).solve(rhs);
    } else {
      Matrix a = Matrix::Zero(n, n);
      Matrix rhs(n, knots_.cols());
      for (Index k = 0; k < n; ++k) {
        const Index prev = (k + n - 1) % n, next = (k + 1) % n;
        a(k, k) = 4.0;
        a(k, prev) += 1.0;
        a(k, next) += 1.0;
        rhs.row(k) = 6.0 * (knots_.row(next) - 2.0 * knots_.row(k) + knots_.row(prev));
      }
      second_ = Eigen::PartialPivLU<Matrix>(a).solve(rhs);
    }
  }

  // Table of about kTablePoints parameters, aligned so every knot is a table
  // point; cumulative length integrates |s'| by 5-point Gauss-Legendre.
  void build_arc_table() {
    const Index segs = segment_count();
    const Index per_segment = std::max<Index>(16, (kTablePoints - 1) / segs);
    const Index count = segs * per_segment + 1;
    step_ = 1.0 / static_cast<double>(per_segment);
    static constexpr std::array<double, 5> nodes{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                                 0.9061798459386640};
    static constexpr std::array<double, 5> weights{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                   0.4786286704993665, 0.2369268850561891};
    cumulative_.assign(static_cast<std::size_t>(count), 0.0);
    table_points_.resize(count, dim());
    for (Index j = 0; j < count; ++j) {
      const double u = static_cast<double>(j) * step_;
      table_points_.row(j) = eval(std::min(u, domain())).transpose();
      if (j == 0) continue;
      const double lo = u - step_, mid = lo + 0.5 * step_;
      double len = 0.0;
      for (std::size_t q = 0; q < nodes.size(); ++q)
        len += weights[q] * derivative(mid + 0.5 * step_ * nodes[q]).norm();
      cumulative_[static_cast<std::size_t>(j)] = cumulative_[static_cast<std::size_t>(j - 1)] + 0.5 * step_ * len;
    }
  }

  Matrix knots_;
  Matrix second_;
  Boundary boundary_ = Boundary::natural;
  double step_ = 1.0;
  std::vector<double> cumulative_;
  Matrix table_points_;
};

inline CubicSpline fit_cubic_spline(const Matrix& knots, Boundary boundary) { return CubicSpline(knots, boundary); }

/// Closed-form spline geodesic between two knots: K + 1 points uniform in arc
/// length. Periodic splines take the shorter arc; a tie goes forward.
inline solver::GeodesicPath spline_geodesic(const CubicSpline& s, Index from, Index to, Index k) {
  solver::require_waypoint_count(k);
  const Index n = s.knot_count();
  require(from >= 0 && from < n && to >= 0 && to < n,
          "spline_geodesic: knot index out of range [0, " + std::to_string(n) + ")");
  solver::GeodesicPath path;
  path.solver = "closed-form";
  path.waypoints.resize(k + 1, s.dim());
  if (from == to) {
    path.waypoints.rowwise() = s.knots().row(from);
    path.flagged = true;
    path.note = "degenerate: identical endpoints";
    return path;
  }
  const double total = s.total_length();
  const double s_from = s.arc_length_at(static_cast<double>(from));
  const double s_to = s.arc_length_at(static_cast<double>(to));
  double start = s_from, delta = s_to - s_from;
  if (s.boundary() == Boundary::periodic) {
    double forward = s_to - s_from;
    if (forward < 0.0) forward += total;
    const double backward = total - forward;
    delta = backward < forward - 1e-9 * total ? -backward : forward;
  }
  for (Index w = 0; w <= k; ++w) {
    double arc = start + delta * static_cast<double>(w) / static_cast<double>(k);
    if (s.boundary() == Boundary::periodic) {
      arc = std::fmod(arc, total);
      if (arc < 0.0) arc += total;
    }
    path.waypoints.row(w) = s.eval(s.parameter_at_arc(arc)).transpose();
  }
  path.waypoints.row(0) = s.knots().row(from);
  path.waypoints.row(k) = s.knots().row(to);
  return path;
}

}  // namespace geosteer::spline
