#pragma once

#include "geosteer/diffcore/matrix.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace geosteer::geom {

inline constexpr double kDistributionTolerance = 1e-9;

/// Validates a distribution and returns it renormalized to sum 1.
/// Inputs off by more than kDistributionTolerance are rejected.
inline Vector checked_distribution(const Vector& p, const char* who) {
  require(p.size() > 0, std::string(who) + ": empty distribution");
  require(p.allFinite() && (p.array() >= 0.0).all(), std::string(who) + ": entries must be finite and non-negative");
  const double s = p.sum();
  require(std::abs(s - 1.0) <= kDistributionTolerance,
          std::string(who) + ": entries sum to " + std::to_string(s) + ", not 1");
  return p / s;
}

/// Bhattacharyya coefficient sum_i sqrt(p_i q_i) of two validated distributions.
inline double bhattacharyya_coefficient(const Vector& p, const Vector& q) {
  require(p.size() == q.size(), "distribution lengths differ: " + std::to_string(p.size()) + " vs " +
                                    std::to_string(q.size()));
  const Vector pp = checked_distribution(p, "bhattacharyya");
  const Vector qq = checked_distribution(q, "bhattacharyya");
  return (pp.array() * qq.array()).sqrt().sum();
}

/// (1/sqrt 2) * || sqrt p - sqrt q ||, in [0, 1].
inline double hellinger(const Vector& p, const Vector& q) {
  require(p.size() == q.size(), "hellinger: distribution lengths differ: " + std::to_string(p.size()) + " vs " +
                                    std::to_string(q.size()));
  const Vector pp = checked_distribution(p, "hellinger");
  const Vector qq = checked_distribution(q, "hellinger");
  return std::min(1.0, (pp.cwiseSqrt() - qq.cwiseSqrt()).norm() / std::numbers::sqrt2);
}

/// -log of the Bhattacharyya coefficient; +infinity for disjoint supports.
inline double bhattacharyya(const Vector& p, const Vector& q) {
  const double bc = std::min(1.0, bhattacharyya_coefficient(p, q));
  if (bc <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(bc);
}

/// Hellinger distance between points already in square-root coordinates.
inline double hellinger_sqrt(const Vector& sp, const Vector& sq) {
  return (sp - sq).norm() / std::numbers::sqrt2;
}

}  // namespace geosteer::geom
