#pragma once

#include "geosteer/geom/divergence.hpp"
#include "geosteer/spline/cubic_spline.hpp"
#include "geosteer/synth/corpus.hpp"

#include <cmath>
#include <limits>

namespace geosteer::spline {

/// Dense samples of a cubic spline through square-root class-output centroids.
struct BehaviorManifold {
  static constexpr Index kSamples = 500;

  Matrix samples;  // kSamples x (K + 1), unit rows with non-negative entries
  CubicSpline source;
  synth::Topology topology = synth::Topology::cyclic;
  double max_renormalization = 0.0;  // largest | ||sample|| - 1 | before renormalizing

  Index dim() const { return samples.cols(); }
};

inline Boundary boundary_for(synth::Topology t) {
  return t == synth::Topology::cyclic ? Boundary::periodic : Boundary::natural;
}

/// Rows of `centroids` are class-mean output distributions in label order.
/// Samples are uniform in the spline parameter, then clipped to the positive
/// orthant and renormalized onto the unit sphere.
inline BehaviorManifold build_behavior_manifold(const Matrix& centroids, synth::Topology topology) {
  require(centroids.rows() >= 3, "build_behavior_manifold: need at least 3 centroids");
  Matrix roots(centroids.rows(), centroids.cols());
  for (Index c = 0; c < centroids.rows(); ++c)
    roots.row(c) = geom::checked_distribution(row_vector(centroids, c), "build_behavior_manifold").cwiseSqrt().transpose();

  BehaviorManifold m;
  m.topology = topology;
  // Equal neighbouring centroids are legitimate here; the uniform-parameter
  // spline stays well defined.
  m.source = CubicSpline(roots, boundary_for(topology), CoincidentKnots::allow);
  m.samples.resize(BehaviorManifold::kSamples, roots.cols());
  const double span = m.source.domain();
  const double denom =
      topology == synth::Topology::cyclic ? static_cast<double>(BehaviorManifold::kSamples)
                                          : static_cast<double>(BehaviorManifold::kSamples - 1);
  for (Index j = 0; j < BehaviorManifold::kSamples; ++j) {
    const double u = std::min(span, span * static_cast<double>(j) / denom);
    Vector x = m.source.eval(u).cwiseMax(0.0);
    const double norm = x.norm();
    require(norm > 0.0, "build_behavior_manifold: sample collapsed to zero");
    m.max_renormalization = std::max(m.max_renormalization, std::abs(norm - 1.0));
    m.samples.row(j) = (x / norm).transpose();
  }
  return m;
}

enum class Divergence { hellinger, bhattacharyya };

struct ManifoldDistance {
  Index sample = 0;
  double hellinger = 0.0;
  double bhattacharyya = 0.0;
};

/// Nearest manifold sample to a point in square-root coordinates. Both
/// divergences are monotone in the chordal distance between unit vectors, so
/// one scan serves both.
inline ManifoldDistance nearest_on_manifold(const Vector& point, const BehaviorManifold& m) {
  require(point.size() == m.dim(), "distance_to_manifold: point has " + std::to_string(point.size()) +
                                       " coordinates, manifold has " + std::to_string(m.dim()));
  require(point.allFinite() && (point.array() >= 0.0).all(),
          "distance_to_manifold: point must be finite and non-negative");
  require(std::abs(point.squaredNorm() - 1.0) <= geom::kDistributionTolerance,
          "distance_to_manifold: squared point does not sum to 1");
  ManifoldDistance out;
  const double sq = (m.samples.rowwise() - point.transpose()).rowwise().squaredNorm().minCoeff(&out.sample);
  const double h2 = std::min(1.0, 0.5 * sq);
  out.hellinger = std::sqrt(h2);
  out.bhattacharyya = h2 >= 1.0 ? std::numeric_limits<double>::infinity() : -std::log1p(-h2);
  return out;
}

inline double distance_to_manifold(const Vector& point, const BehaviorManifold& m, Divergence measure) {
  const auto d = nearest_on_manifold(point, m);
  return measure == Divergence::hellinger ? d.hellinger : d.bhattacharyya;
}

}  // namespace geosteer::spline
