#include "geosteer/diffcore/finite_diff.hpp"
#include "geosteer/spline/behavior_manifold.hpp"
#include "geosteer/synth/task.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

using namespace geosteer;
using namespace geosteer::spline;

namespace {

Matrix five_knots() {
  Matrix k(5, 2);
  k << 0, 0, 1, 2, 3, 1, 4, 4, 2, 5;
  return k;
}

Matrix random_knots(std::mt19937_64& rng, Index n, Index d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix k(n, d);
  for (Index i = 0; i < k.size(); ++i) k.data()[i] = g(rng);
  return k;
}

Matrix rows2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

// Reference values frozen from an independent cubic-spline implementation
// (natural and periodic end conditions, knots at 0..n-1).
TEST(CubicSplineFit, NaturalMatchesReference) {
  const CubicSpline s(five_knots(), Boundary::natural);
  const double expect[3][5] = {{0.5, 0.3928571428571429, 1.421875, 0.9285714285714286, 2.28125},
                               {1.7, 2.3729999999999993, 1.071625, 2.1414285714285715, -1.11625},
                               {3.25, 3.734375, 4.537109375, -1.5089285714285714, 1.6015625}};
  for (const auto& e : expect) {
    EXPECT_NEAR(s.eval(e[0])[0], e[1], 1e-12);
    EXPECT_NEAR(s.eval(e[0])[1], e[2], 1e-12);
    EXPECT_NEAR(s.derivative(e[0])[0], e[3], 1e-12);
    EXPECT_NEAR(s.derivative(e[0])[1], e[4], 1e-12);
  }
  EXPECT_NEAR(s.total_length(), 10.455845286827358, 1e-9);
}

TEST(CubicSplineFit, PeriodicMatchesReference) {
  const CubicSpline s(five_knots(), Boundary::periodic);
  const double expect[3][5] = {{0.5, 0.19318181818181812, 0.6590909090909093, 1.1590909090909092, 3.1363636363636376},
                               {1.7, 2.4076363636363634, 1.2446363636363638, 2.0236363636363635, -1.6009090909090924},
                               {4.6, 0.5207272727272734, 1.6552727272727288, -1.9418181818181828, -5.869090909090911}};
  for (const auto& e : expect) {
    EXPECT_NEAR(s.eval(e[0])[0], e[1], 1e-12);
    EXPECT_NEAR(s.eval(e[0])[1], e[2], 1e-12);
    EXPECT_NEAR(s.derivative(e[0])[0], e[3], 1e-12);
    EXPECT_NEAR(s.derivative(e[0])[1], e[4], 1e-12);
  }
  EXPECT_NEAR(s.total_length(), 16.711134278587604, 1e-9);
}

TEST(CubicSplineFit, InterpolatesEveryKnotAndIsC2) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 4 + trial % 9;
    const Matrix k = random_knots(rng, n, 6);
    for (auto b : {Boundary::natural, Boundary::periodic}) {
      const CubicSpline s(k, b);
      for (Index i = 0; i < n; ++i) EXPECT_LT((s.eval(static_cast<double>(i)) - row_vector(k, i)).norm(), 1e-9);
      for (Index i = 1; i + 1 < n; ++i) {
        const double u = static_cast<double>(i);
        EXPECT_LT((s.derivative(u - 1e-13) - s.derivative(u + 1e-13)).norm(), 1e-9);
        EXPECT_LT((s.second_derivative(u - 1e-13) - s.second_derivative(u + 1e-13)).norm(), 1e-9);
      }
    }
  }
}

TEST(CubicSplineFit, PeriodicWrapContinuity) {
  Matrix square(4, 2);
  square << 1, 0, 0, 1, -1, 0, 0, -1;
  const CubicSpline s(square, Boundary::periodic);
  const double end = s.domain() - 1e-15;
  EXPECT_LT((s.eval(0.0) - s.eval(4.0)).norm(), 1e-9);
  EXPECT_LT((s.eval(0.0) - s.eval(end)).norm(), 1e-9);
  EXPECT_LT((s.derivative(0.0) - s.derivative(end)).norm(), 1e-9);
  EXPECT_LT((s.second_derivative(0.0) - s.second_derivative(end)).norm(), 1e-9);
  for (double u : {0.3, 1.7, 3.9}) EXPECT_LT((s.eval(u) - s.eval(u + 4.0)).norm(), 1e-12);
  EXPECT_LT((s.eval(-0.5) - s.eval(3.5)).norm(), 1e-12);
}

TEST(CubicSplineFit, CollinearKnotsGiveTheLine) {
  Matrix k(3, 2);
  k << 0, 0, 1, 1, 2, 2;
  const CubicSpline s(k, Boundary::natural);
  EXPECT_NEAR(s.eval(0.5)[0], 0.5, 1e-15);
  EXPECT_NEAR(s.eval(0.5)[1], 0.5, 1e-15);
  for (double u : {0.0, 0.4, 1.3, 2.0}) {
    EXPECT_NEAR(s.derivative(u)[0], 1.0, 1e-15);
    EXPECT_NEAR(s.derivative(u)[1], 1.0, 1e-15);
  }
}

TEST(CubicSplineFit, DerivativeMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> pick(0.05, 0.95);
  for (auto b : {Boundary::natural, Boundary::periodic}) {
    const CubicSpline s(random_knots(rng, 8, 5), b);
    for (int t = 0; t < 100; ++t) {
      const double u = pick(rng) * (s.domain() - 0.1) + 0.05;
      Vector x(1);
      x << u;
      const Matrix fd = diff::finite_difference_jacobian([&](const Vector& v) { return s.eval(v[0]); }, x, 1e-5);
      EXPECT_LT(diff::relative_error(Matrix(s.derivative(u)), fd), 1e-7) << u;
    }
  }
}

TEST(CubicSplineFit, RejectsBadInput) {
  EXPECT_THROW(CubicSpline(rows2(0, 0, 1, 1), Boundary::natural), ContractViolation);
  Matrix three(3, 2);
  three << 0, 0, 1, 0, 0, 1;
  EXPECT_THROW(CubicSpline(three, Boundary::periodic), ContractViolation);
  Matrix dup(4, 2);
  dup << 0, 0, 1, 1, 1, 1, 2, 0;
  EXPECT_THROW(CubicSpline(dup, Boundary::natural), ContractViolation);
  Matrix wrap_dup(4, 2);
  wrap_dup << 0, 0, 1, 1, 2, 0, 0, 0;
  EXPECT_NO_THROW(CubicSpline(wrap_dup, Boundary::natural));
  EXPECT_THROW(CubicSpline(wrap_dup, Boundary::periodic), ContractViolation);
  const CubicSpline s(five_knots(), Boundary::natural);
  EXPECT_THROW(s.eval(-0.01), ContractViolation);
  EXPECT_THROW(s.eval(4.01), ContractViolation);
  EXPECT_NO_THROW(s.eval(4.0));
}

TEST(CubicSplineArc, TableInvertsAndMatchesLength) {
  const CubicSpline s(five_knots(), Boundary::natural);
  EXPECT_EQ(s.arc_length_at(0.0), 0.0);
  EXPECT_DOUBLE_EQ(s.arc_length_at(4.0), s.total_length());
  for (double u : {0.2, 1.0, 2.7, 3.9}) EXPECT_NEAR(s.parameter_at_arc(s.arc_length_at(u)), u, 1e-12);
  EXPECT_GE(s.table_points().rows(), 2000);
}

TEST(SplineGeodesic, CollinearAdjacentKnotsGiveChord) {
  Matrix k(4, 3);
  k << 0, 0, 0, 1, 2, 2, 2, 4, 4, 3, 6, 6;
  const CubicSpline s(k, Boundary::natural);
  const auto p = spline_geodesic(s, 1, 2, 10);
  EXPECT_EQ(p.waypoints.rows(), 11);
  EXPECT_EQ(p.start(), row_vector(k, 1));
  EXPECT_EQ(p.end(), row_vector(k, 2));
  double len = 0;
  for (Index w = 0; w < 10; ++w) len += (p.waypoints.row(w + 1) - p.waypoints.row(w)).norm();
  EXPECT_NEAR(len, 3.0, 1e-12);
  EXPECT_NEAR(s.arc_length_at(2.0) - s.arc_length_at(1.0), 3.0, 1e-12);
}

TEST(SplineGeodesic, PeriodicTakesShorterArc) {
  const auto task = synth::generate_corpus(synth::preset("weekdays-7"));
  const CubicSpline s(task.truth.anchors, Boundary::periodic);
  const auto fwd = spline_geodesic(s, 0, 3, 30);
  const auto bwd = spline_geodesic(s, 0, 4, 30);
  // Forward 0 -> 3 passes anchors 1 and 2; backward 0 -> 4 passes 6 and 5.
  auto nearest_anchor = [&](const Matrix& w, Index row) {
    Index a;
    (task.truth.anchors.rowwise() - w.row(row)).rowwise().squaredNorm().minCoeff(&a);
    return a;
  };
  EXPECT_EQ(nearest_anchor(fwd.waypoints, 10), 1);
  EXPECT_EQ(nearest_anchor(fwd.waypoints, 20), 2);
  EXPECT_EQ(nearest_anchor(bwd.waypoints, 10), 6);
  EXPECT_EQ(nearest_anchor(bwd.waypoints, 20), 5);
  EXPECT_EQ(bwd.end(), row_vector(task.truth.anchors, 4));
}

TEST(SplineGeodesic, TieGoesTowardIncreasingIndex) {
  Matrix hex(6, 2);
  for (Index i = 0; i < 6; ++i) hex.row(i) << std::cos(i * std::numbers::pi / 3), std::sin(i * std::numbers::pi / 3);
  const CubicSpline s(hex, Boundary::periodic);
  const auto p = spline_geodesic(s, 0, 3, 6);
  EXPECT_GT(p.waypoints(2, 1), 0.5);  // through knot 1, upper half
}

TEST(SplineGeodesic, UniformArcSpacing) {
  std::mt19937_64 rng(8);
  for (auto b : {Boundary::natural, Boundary::periodic}) {
    const CubicSpline s(random_knots(rng, 7, 4), b);
    const auto p = spline_geodesic(s, 1, 5, 50);
    // Oracle: a 200k-point polyline, independent of the spline's own table.
    const Index fine = 200000;
    const double lo = 1.0, hi = b == Boundary::natural ? 5.0 : 7.0 + 5.0;
    const bool backward = b == Boundary::periodic && s.arc_length_at(5.0) - s.arc_length_at(1.0) > 0.5 * s.total_length();
    Matrix poly(fine + 1, 4);
    for (Index j = 0; j <= fine; ++j) {
      const double f = static_cast<double>(j) / static_cast<double>(fine);
      const double u = backward ? lo - f * (lo + 7.0 - 5.0) : lo + f * (hi - lo);
      poly.row(j) = s.eval(b == Boundary::natural ? std::min(u, 5.0) : u).transpose();
    }
    std::vector<double> cum(static_cast<std::size_t>(fine) + 1, 0.0);
    for (Index j = 1; j <= fine; ++j)
      cum[static_cast<std::size_t>(j)] = cum[static_cast<std::size_t>(j - 1)] + (poly.row(j) - poly.row(j - 1)).norm();
    std::vector<double> at;
    for (Index w = 0; w <= 50; ++w) {
      Index nearest;
      (poly.rowwise() - p.waypoints.row(w)).rowwise().squaredNorm().minCoeff(&nearest);
      at.push_back(cum[static_cast<std::size_t>(nearest)]);
    }
    const double step = at.back() / 50.0;
    for (Index w = 0; w < 50; ++w) EXPECT_NEAR((at[w + 1] - at[w]) / step, 1.0, 0.01) << w;
  }
}

TEST(SplineGeodesic, DegenerateEndpointsFlagged) {
  const CubicSpline s(five_knots(), Boundary::natural);
  const auto p = spline_geodesic(s, 2, 2, 5);
  EXPECT_TRUE(p.flagged);
  for (Index w = 0; w <= 5; ++w) EXPECT_EQ(p.waypoints.row(w), s.knots().row(2));
  EXPECT_THROW(spline_geodesic(s, 0, 5, 5), ContractViolation);
}

// ---------------------------------------------------------------- manifold

namespace {

Matrix output_centroids(const synth::SyntheticTask& task) {
  Matrix c = Matrix::Zero(static_cast<Index>(task.corpus.classes), static_cast<Index>(task.corpus.classes) + 1);
  std::vector<double> count(task.corpus.classes, 0.0);
  for (std::size_t i = 0; i < task.corpus.size(); ++i) {
    c.row(static_cast<Index>(task.corpus.labels[i])) += task.head.eval(row_vector(task.corpus.points, static_cast<Index>(i))).transpose();
    count[task.corpus.labels[i]] += 1.0;
  }
  for (Index r = 0; r < c.rows(); ++r) c.row(r) /= count[static_cast<std::size_t>(r)];
  return c;
}

}  // namespace

TEST(BehaviorManifoldBuild, SamplesAreUnitAndNonNegative) {
  for (const auto& name : synth::preset_names()) {
    const auto task = synth::generate_corpus(synth::preset(name));
    const auto m = build_behavior_manifold(output_centroids(task), task.corpus.topology);
    EXPECT_EQ(m.samples.rows(), 500);
    EXPECT_GE(m.samples.minCoeff(), 0.0);
    EXPECT_LT((m.samples.rowwise().squaredNorm().array() - 1.0).abs().maxCoeff(), 1e-12);
    // Frozen from the oracle run (largest drift 5.7e-3, on weekdays-7).
    EXPECT_LT(m.max_renormalization, 1e-2) << name;
  }
}

TEST(BehaviorManifoldBuild, KnotsReproduceRootCentroids) {
  const auto task = synth::generate_corpus(synth::preset("weekdays-7"));
  const Matrix cent = output_centroids(task);
  const auto m = build_behavior_manifold(cent, task.corpus.topology);
  for (Index c = 0; c < 7; ++c)
    EXPECT_LT((m.source.eval(static_cast<double>(c)) - row_vector(cent, c).cwiseSqrt()).norm(), 1e-9);
}

TEST(BehaviorManifoldBuild, EqualCentroidsGiveConstantSamples) {
  Matrix cent(4, 3);
  cent.rowwise() = (RowVector(3) << 0.2, 0.5, 0.3).finished();
  const auto m = build_behavior_manifold(cent, synth::Topology::sequential);
  const RowVector root = cent.row(0).cwiseSqrt();
  for (Index j = 0; j < m.samples.rows(); ++j) EXPECT_LT((m.samples.row(j) - root).norm(), 1e-15);
}

TEST(BehaviorManifoldBuild, RejectsInvalidCentroids) {
  Matrix bad(3, 2);
  bad << 0.5, 0.5, 0.7, 0.7, 0.1, 0.9;
  EXPECT_THROW(build_behavior_manifold(bad, synth::Topology::sequential), ContractViolation);
  EXPECT_THROW(build_behavior_manifold(Matrix::Constant(2, 2, 0.5), synth::Topology::sequential), ContractViolation);
}

TEST(ManifoldDistance, MatchesExhaustiveScanOracle) {
  const auto task = synth::generate_corpus(synth::preset("months-12"));
  const auto m = build_behavior_manifold(output_centroids(task), task.corpus.topology);
  for (std::size_t i = 0; i < task.corpus.size(); i += 50) {
    const Vector p = task.head.eval(row_vector(task.corpus.points, static_cast<Index>(i)));
    const Vector x = p.cwiseSqrt() / p.cwiseSqrt().norm();
    double best_h = 1e300, best_b = 1e300;
    for (Index j = 0; j < m.samples.rows(); ++j) {
      const Vector q = m.samples.row(j).transpose().cwiseAbs2();
      best_h = std::min(best_h, geom::hellinger(x.cwiseAbs2(), q / q.sum()));
      best_b = std::min(best_b, geom::bhattacharyya(x.cwiseAbs2(), q / q.sum()));
    }
    EXPECT_NEAR(distance_to_manifold(x, m, Divergence::hellinger), best_h, 1e-12);
    EXPECT_NEAR(distance_to_manifold(x, m, Divergence::bhattacharyya), best_b, 1e-12);
    EXPECT_LE(distance_to_manifold(x, m, Divergence::bhattacharyya), best_b + 1e-15);
  }
}

TEST(ManifoldDistance, ZeroExactlyOnSamples) {
  const auto task = synth::generate_corpus(synth::preset("weekdays-7"));
  const auto m = build_behavior_manifold(output_centroids(task), task.corpus.topology);
  for (Index j = 0; j < 500; j += 37) {
    const Vector s = row_vector(m.samples, j);
    EXPECT_EQ(distance_to_manifold(s, m, Divergence::bhattacharyya), 0.0);
    EXPECT_EQ(distance_to_manifold(s, m, Divergence::hellinger), 0.0);
  }
  Vector off = Vector::Zero(8);
  off[7] = 1.0;
  EXPECT_GT(distance_to_manifold(off, m, Divergence::bhattacharyya), 1e-3);
  EXPECT_THROW(distance_to_manifold(Vector::Ones(8), m, Divergence::hellinger), ContractViolation);
}
