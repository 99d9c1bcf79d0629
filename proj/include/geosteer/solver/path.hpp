#pragma once

#include "geosteer/diffcore/matrix.hpp"

#include <string>
#include <vector>

namespace geosteer::solver {

/// Discretized path: row k is waypoint k, rows 0 and K are the endpoints.
struct GeodesicPath {
  Matrix waypoints;
  std::string solver;
  std::vector<double> length_trace;  // optimized paths only
  bool flagged = false;
  std::string note;

  Index segments() const { return waypoints.rows() - 1; }
  Index dim() const { return waypoints.cols(); }
  Vector start() const { return row_vector(waypoints, 0); }
  Vector end() const { return row_vector(waypoints, waypoints.rows() - 1); }
};

inline void require_waypoint_count(Index k) {
  require(k >= 1, "path needs at least one segment (K = " + std::to_string(k) + ")");
}

}  // namespace geosteer::solver
