#include "geosteer/diffcore/finite_diff.hpp"
#include "geosteer/metricspace/metric_field.hpp"
#include "geosteer/synth/task.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace geosteer;
using metric::MetricField;

namespace {

Vector random_vector(std::mt19937_64& rng, Index d, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = g(rng);
  return v;
}

std::shared_ptr<const encoder::EncoderModel> linear_encoder(const Matrix& w) {
  auto m = std::make_shared<encoder::EncoderModel>();
  m->encoder.layers.push_back(encoder::Dense{w, Matrix::Zero(1, w.cols())});
  m->decoder.layers.push_back(encoder::Dense{w.transpose(), Matrix::Zero(1, w.rows())});
  return m;
}

std::shared_ptr<const synth::BehaviorHead> small_head(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix anchors(4, 6);
  for (Index c = 0; c < 4; ++c) anchors.row(c) = random_vector(rng, 6, 0.7).transpose();
  return std::make_shared<synth::BehaviorHead>(anchors, 0.8, -1.0);
}

// Every variant on the same small ambient space.
std::vector<MetricField> all_variants() {
  auto spline = std::make_shared<spline::CubicSpline>(
      Matrix{{0, 0, 0, 0, 0, 0}, {1, 0.5, 0, 0, 0, 0}, {2, 0, 0.5, 0, 0, 0}, {3, 1, 0, 0, 0, 0}},
      spline::Boundary::natural);
  return {MetricField::flat(6), MetricField::spline(spline, 0.002, 1e9),
          MetricField::encoder(std::make_shared<encoder::EncoderModel>(encoder::make_encoder_model(6, 3, {10, 8}, 3))),
          MetricField::analytical(small_head(5))};
}

}  // namespace

TEST(MetricField, FlatQuadraticForm) {
  const MetricField m = MetricField::flat(5, 0.001);
  Vector v = Vector::Zero(5);
  v[2] = 1.0;
  EXPECT_DOUBLE_EQ(m.apply(Vector::Zero(5), v), 1.001);
  EXPECT_EQ(m.apply(Vector::Zero(5), Vector::Zero(5)), 0.0);
  EXPECT_TRUE(m.jacobian_factor(Vector::Ones(5)).isIdentity());
}

TEST(MetricField, LinearEncoderScalesByFour) {
  const MetricField m = MetricField::encoder(linear_encoder(2.0 * Matrix::Identity(4, 4)), 0.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) {
    const Vector h = random_vector(rng, 4), v = random_vector(rng, 4);
    EXPECT_NEAR(m.apply(h, v), 4.0 * v.squaredNorm(), 1e-12 * v.squaredNorm());
  }
}

TEST(MetricField, HomogeneousAndBoundedBelow) {
  std::mt19937_64 rng(2);
  for (const auto& m : all_variants()) {
    for (int i = 0; i < 20; ++i) {
      Vector h = random_vector(rng, 6, 0.5);
      if (m.kind() == metric::MetricKind::spline_fff) h = Vector{{1.5, 0.2, 0.1, 0, 0, 0}};
      const Vector v = random_vector(rng, 6);
      const double a = 0.1 + 3.0 * std::uniform_real_distribution<double>(0, 1)(rng);
      const double q = m.apply(h, v);
      EXPECT_NEAR(m.apply(h, a * v), a * a * q, 1e-12 * a * a * q) << metric::to_string(m.kind());
      EXPECT_GE(q, m.epsilon() * v.squaredNorm() * (1 - 1e-15)) << metric::to_string(m.kind());
    }
  }
}

TEST(MetricField, EncoderFactorMatchesDenseForm) {
  const auto model = std::make_shared<encoder::EncoderModel>(encoder::make_encoder_model(5, 3, {7, 6}, 11));
  const MetricField m = MetricField::encoder(model, 0.01);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Vector h = random_vector(rng, 5), v = random_vector(rng, 5);
    const Matrix j = model->jacobian(h);
    const Matrix dense = j.transpose() * j + 0.01 * Matrix::Identity(5, 5);
    EXPECT_NEAR(m.apply(h, v), v.dot(dense * v), 1e-10);
  }
}

TEST(MetricField, AnalyticalMatchesFiniteDifferenceJacobian) {
  const auto head = small_head(7);
  const MetricField m = MetricField::analytical(head, 1e-3);
  std::mt19937_64 rng(4);
  auto sqrt_out = [&](const Vector& h) { return Vector(head->eval(h).cwiseSqrt()); };
  for (int i = 0; i < 20; ++i) {
    const Vector h = random_vector(rng, 6, 0.6), v = random_vector(rng, 6);
    const Matrix fd = diff::finite_difference_jacobian(sqrt_out, h, 1e-6);
    const double expect = (fd * v).squaredNorm() + 1e-3 * v.squaredNorm();
    EXPECT_LT(std::abs(m.apply(h, v) - expect) / expect, 1e-5);
  }
}

TEST(MetricField, AnalyticalLiftUsesOneCarrier) {
  const auto task = synth::generate_corpus(synth::preset("weekdays-7"));
  const auto head = std::make_shared<synth::BehaviorHead>(task.head);
  const geom::PcaModel pca = geom::fit_pca(task.corpus.points, 8);
  const Vector carrier = row_vector(task.corpus.points, static_cast<Index>(task.corpus.val.front()));
  const MetricField m = MetricField::analytical(head, 1e-3, metric::SubspaceLift{pca, carrier});
  EXPECT_EQ(m.ambient_dim(), 8);
  auto through_lift = [&](const Vector& u) {
    return Vector(head->eval(geom::subspace_replace_centered(carrier, u, pca)).cwiseSqrt());
  };
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const Vector u = pca.project(row_vector(task.corpus.points, static_cast<Index>(i * 97))) + random_vector(rng, 8, 0.05);
    const Matrix fd = diff::finite_difference_jacobian(through_lift, u, 1e-6);
    EXPECT_LT(diff::relative_error(m.jacobian_factor(u), fd), 1e-5);
  }
}

TEST(MetricField, SplineUsesUnitTangentAndRejectsOffTube) {
  auto s = std::make_shared<spline::CubicSpline>(Matrix{{0, 0, 0}, {1, 1, 0}, {2, 0, 0}, {3, 1, 0}},
                                                 spline::Boundary::natural);
  const MetricField m = MetricField::spline(s, 1e-3);
  const double u = s->table_parameter(300);
  const Vector h = s->eval(u), tangent = s->derivative(u).normalized();
  const Matrix j = m.jacobian_factor(h);
  ASSERT_EQ(j.rows(), 1);
  EXPECT_NEAR((j.row(0).transpose() - tangent).norm(), 0.0, 1e-12);
  EXPECT_NEAR(m.apply(h, tangent), 1.001, 1e-12);
  Vector normal = Vector::Zero(3);
  normal[2] = 1.0;
  EXPECT_NEAR(m.apply(h, normal), 1e-3, 1e-15);
  EXPECT_THROW(m.jacobian_factor(h + normal), ContractViolation);
}

TEST(MetricField, RejectsMismatchedShapes) {
  const MetricField m = MetricField::flat(3);
  EXPECT_THROW(m.apply(Vector::Zero(4), Vector::Zero(4)), ContractViolation);
  EXPECT_THROW(m.jacobian_factor(Vector::Zero(2)), ContractViolation);
  EXPECT_THROW(MetricField::flat(3, -1.0), ContractViolation);
}
