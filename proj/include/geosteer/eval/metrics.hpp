#pragma once

#include "geosteer/geom/pca.hpp"
#include "geosteer/solver/path.hpp"
#include "geosteer/spline/behavior_manifold.hpp"
#include "geosteer/synth/head.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <limits>
#include <optional>

namespace geosteer::eval {

/// How waypoints reach the head: replace the carrier's centred principal
/// coordinates, or use the waypoint as the whole activation.
struct Injection {
  const geom::PcaModel* pca = nullptr;  // null: direct
  Vector carrier;

  static Injection direct() { return {}; }
  static Injection subspace(const geom::PcaModel& pca, Vector carrier) { return {&pca, std::move(carrier)}; }
  bool is_direct() const { return pca == nullptr; }
};

/// Head outputs along a path, one distribution per waypoint.
struct BehaviorTrajectory {
  Matrix outputs;  // (K+1) x (classes+1)
  std::string provenance;

  Index size() const { return outputs.rows(); }
  Index classes() const { return outputs.cols() - 1; }
  Vector at(Index k) const { return row_vector(outputs, k); }
};

inline BehaviorTrajectory steer_and_record(const solver::GeodesicPath& path, const synth::BehaviorHead& head,
                                           const Injection& inj) {
  require(path.waypoints.rows() >= 1, "steer_and_record: empty path");
  BehaviorTrajectory tr;
  tr.provenance = path.solver;
  tr.outputs.resize(path.waypoints.rows(), head.outputs());
  if (inj.is_direct()) {
    require(path.dim() == head.ambient_dim(), "steer_and_record: direct injection needs " +
                                                  std::to_string(head.ambient_dim()) + "-D waypoints, path is " +
                                                  std::to_string(path.dim()) + "-D");
  } else {
    require(path.dim() == inj.pca->rank() && inj.carrier.size() == head.ambient_dim() &&
                inj.pca->dim() == head.ambient_dim(),
            "steer_and_record: subspace injection needs " + std::to_string(inj.pca->rank()) +
                "-D waypoints and a carrier in the head's space");
  }
  for (Index k = 0; k < path.waypoints.rows(); ++k) {
    const Vector w = row_vector(path.waypoints, k);
    const Vector h = inj.is_direct() ? w : geom::subspace_replace_centered(inj.carrier, w, *inj.pca);
    tr.outputs.row(k) = head.eval(h).transpose();
  }
  return tr;
}

/// Class-mean head outputs in label order.
inline Matrix output_centroids(const Matrix& points, const std::vector<std::size_t>& labels, std::size_t classes,
                               const synth::BehaviorHead& head) {
  require(static_cast<std::size_t>(points.rows()) == labels.size(), "output_centroids: label count mismatch");
  Matrix c = Matrix::Zero(static_cast<Index>(classes), head.outputs());
  std::vector<double> count(classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    c.row(static_cast<Index>(labels[i])) += head.eval(row_vector(points, static_cast<Index>(i))).transpose();
    count[labels[i]] += 1.0;
  }
  for (std::size_t r = 0; r < classes; ++r) {
    require(count[r] > 0.0, "output_centroids: class " + std::to_string(r) + " has no points");
    c.row(static_cast<Index>(r)) /= count[r];
  }
  return c;
}

struct Energy {
  double value = 0.0;
  std::optional<Index> infinite_at;  // first waypoint with zero overlap
};

/// Mean over waypoints of the Bhattacharyya distance to the manifold.
inline Energy energy_bc(const BehaviorTrajectory& tr, const spline::BehaviorManifold& m) {
  require(tr.outputs.cols() == m.dim(), "energy_bc: trajectory has " + std::to_string(tr.outputs.cols()) +
                                            " outputs, manifold has " + std::to_string(m.dim()));
  require(tr.size() >= 1, "energy_bc: empty trajectory");
  Energy e;
  for (Index k = 0; k < tr.size(); ++k) {
    const double d = spline::distance_to_manifold(tr.at(k).cwiseSqrt(), m, spline::Divergence::bhattacharyya);
    if (std::isinf(d)) {
      e.value = std::numeric_limits<double>::infinity();
      e.infinite_at = k;
      return e;
    }
    e.value += d;
  }
  e.value /= static_cast<double>(tr.size());
  return e;
}

/// Sum of Hellinger distances between consecutive outputs.
inline double arc_length_behavior(const BehaviorTrajectory& tr) {
  require(tr.size() >= 2, "arc_length_behavior: need at least two waypoints");
  double total = 0.0;
  for (Index k = 0; k + 1 < tr.size(); ++k) total += geom::hellinger(tr.at(k), tr.at(k + 1));
  return total;
}

inline Index top_output(const Vector& p) {
  Index arg = 0;
  p.maxCoeff(&arg);
  return arg;
}

/// Fraction of waypoints whose most probable output is a class, not "other".
inline double legibility(const BehaviorTrajectory& tr) {
  require(tr.size() >= 1, "legibility: empty trajectory");
  Index hits = 0;
  for (Index k = 0; k < tr.size(); ++k) hits += top_output(tr.at(k)) != tr.classes() ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(tr.size());
}

inline double target_prob_end(const BehaviorTrajectory& tr, Index target) {
  require(target >= 0 && target < tr.classes(), "target_prob_end: target class out of range");
  return tr.outputs(tr.size() - 1, target);
}

inline bool top1_at_end(const BehaviorTrajectory& tr, Index target) {
  require(target >= 0 && target < tr.classes(), "top1_at_end: target class out of range");
  return top_output(tr.at(tr.size() - 1)) == target;
}

/// Classes strictly between two endpoints in label order; cyclic tasks use
/// the shorter way round, forward on a tie.
inline std::vector<Index> expected_intermediates(Index from, Index to, Index classes, synth::Topology topology) {
  require(from >= 0 && to >= 0 && from < classes && to < classes, "expected_intermediates: class out of range");
  std::vector<Index> out;
  if (topology == synth::Topology::sequential) {
    for (Index c = std::min(from, to) + 1; c < std::max(from, to); ++c) out.push_back(c);
    return out;
  }
  const Index forward = ((to - from) % classes + classes) % classes;
  const Index backward = classes - forward;
  if (forward == 0) return out;
  const Index step = backward < forward ? -1 : 1;
  const Index hops = std::min(forward, backward);
  for (Index h = 1; h < hops; ++h) out.push_back(((from + step * h) % classes + classes) % classes);
  return out;
}

struct VisitRate {
  double rate = 1.0;
  bool vacuous = false;  // no intermediates expected
};

inline VisitRate visit_intermediates(const BehaviorTrajectory& tr, Index from, Index to, synth::Topology topology) {
  const auto expected = expected_intermediates(from, to, tr.classes(), topology);
  if (expected.empty()) return {1.0, true};
  std::vector<bool> seen(static_cast<std::size_t>(tr.classes() + 1), false);
  for (Index k = 0; k < tr.size(); ++k) seen[static_cast<std::size_t>(top_output(tr.at(k)))] = true;
  Index hits = 0;
  for (Index c : expected) hits += seen[static_cast<std::size_t>(c)] ? 1 : 0;
  return {static_cast<double>(hits) / static_cast<double>(expected.size()), false};
}

struct TTest {
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// Paired two-sided t-test on a - b with n - 1 degrees of freedom.
inline TTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "paired_t_test: samples differ in length");
  require(a.size() >= 2, "paired_t_test: need at least two pairs");
  const double n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  require(std::isfinite(mean) && std::isfinite(ss), "paired_t_test: non-finite differences");
  require(ss > 0.0, "paired_t_test: differences have zero variance");
  const double sd = std::sqrt(ss / (n - 1.0));
  TTest out;
  out.n = a.size();
  out.t = mean / (sd / std::sqrt(n));
  const boost::math::students_t dist(n - 1.0);
  out.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
  return out;
}

}  // namespace geosteer::eval
