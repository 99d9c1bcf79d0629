#include "geosteer/geom/distance_matrix.hpp"
#include "geosteer/geom/divergence.hpp"
#include "geosteer/geom/pca.hpp"
#include "geosteer/geom/phate.hpp"
#include "geosteer/synth/task.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace geosteer;
using namespace geosteer::geom;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector random_distribution(std::mt19937_64& rng, Index k) {
  std::uniform_real_distribution<double> u(1e-3, 1.0);
  Vector p(k);
  for (auto& x : p) x = u(rng);
  return p / p.sum();
}

}  // namespace

TEST(Hellinger, HandValues) {
  EXPECT_EQ(hellinger(vec({0.3, 0.7}), vec({0.3, 0.7})), 0.0);
  EXPECT_DOUBLE_EQ(hellinger(vec({1, 0}), vec({0, 1})), 1.0);
  EXPECT_NEAR(hellinger(vec({0.25, 0.75}), vec({0.75, 0.25})), 0.3660, 5e-5);
}

TEST(Hellinger, RejectsBadInput) {
  EXPECT_THROW(hellinger(vec({0.5, 0.5}), vec({1.0})), ContractViolation);
  EXPECT_THROW(hellinger(vec({0.5, 0.6}), vec({0.5, 0.5})), ContractViolation);
  EXPECT_THROW(hellinger(vec({1.5, -0.5}), vec({0.5, 0.5})), ContractViolation);
  EXPECT_NO_THROW(hellinger(vec({0.5 + 5e-10, 0.5}), vec({0.5, 0.5})));
}

TEST(Bhattacharyya, HandValuesAndInfinity) {
  EXPECT_EQ(bhattacharyya(vec({0.3, 0.7}), vec({0.3, 0.7})), 0.0);
  EXPECT_TRUE(std::isinf(bhattacharyya(vec({1, 0}), vec({0, 1}))));
  const double dbc = bhattacharyya(vec({0.25, 0.75}), vec({0.75, 0.25}));
  EXPECT_NEAR(dbc, 0.1438, 5e-5);
  const double dh = hellinger(vec({0.25, 0.75}), vec({0.75, 0.25}));
  EXPECT_NEAR(1.0 - dh * dh, 0.8660, 5e-5);
  EXPECT_NEAR(1.0 - dh * dh, std::exp(-dbc), 1e-12);
}

TEST(Bhattacharyya, HellingerIdentityOnRandomPairs) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 1000; ++t) {
    const Index k = 2 + t % 12;
    const Vector p = random_distribution(rng, k), q = random_distribution(rng, k);
    const double dh = hellinger(p, q);
    EXPECT_GE(dh, 0.0);
    EXPECT_LE(dh, 1.0);
    EXPECT_NEAR(bhattacharyya(p, q), -std::log(1.0 - dh * dh), 1e-12);
  }
}

TEST(DistanceMatrixType, ValidatesInvariants) {
  Matrix ok(2, 2);
  ok << 0, 1, 1, 0;
  EXPECT_NO_THROW(DistanceMatrix(ok, DistanceSource::ground_truth));
  Matrix asym = ok;
  asym(0, 1) = 1.1;
  EXPECT_THROW(DistanceMatrix(asym, DistanceSource::ground_truth), ContractViolation);
  Matrix diag = ok;
  diag(1, 1) = 0.1;
  EXPECT_THROW(DistanceMatrix(diag, DistanceSource::ground_truth), ContractViolation);
  EXPECT_THROW(DistanceMatrix(-ok, DistanceSource::ground_truth), ContractViolation);
}

TEST(OutputHellinger, MatchesRowByRowOracle) {
  auto task = synth::generate_corpus(synth::preset("weekdays-7"));
  const Matrix pts = task.corpus.points.topRows(60);
  const auto dm = output_hellinger_matrix(pts, task.head);
  EXPECT_EQ(dm.source(), DistanceSource::output_hellinger);
  EXPECT_LE(dm.values().maxCoeff(), 1.0);
  for (Index i = 0; i < 60; i += 7)
    for (Index j = 0; j < 60; j += 5)
      EXPECT_NEAR(dm(i, j), hellinger(task.head.eval(pts.row(i).transpose()), task.head.eval(pts.row(j).transpose())),
                  1e-12);
  Matrix twins(2, 64);
  twins.row(0) = pts.row(0);
  twins.row(1) = pts.row(0);
  EXPECT_EQ(output_hellinger_matrix(twins, task.head)(0, 1), 0.0);
}

// -------------------------------------------------------------------- PHATE

namespace {

// Straight-line reimplementation of the three stages with plain loops.
Matrix phate_oracle(const Matrix& pts, std::size_t knn, int t) {
  const int n = static_cast<int>(pts.rows());
  std::vector<std::vector<double>> x(n, std::vector<double>(pts.cols()));
  for (int i = 0; i < n; ++i) {
    double nn = 0;
    for (int c = 0; c < pts.cols(); ++c) nn += pts(i, c) * pts(i, c);
    nn = std::sqrt(nn);
    for (int c = 0; c < pts.cols(); ++c) x[i][c] = pts(i, c) / nn;
  }
  auto dist = [&](int i, int j) {
    double s = 0;
    for (std::size_t c = 0; c < x[i].size(); ++c) s += (x[i][c] - x[j][c]) * (x[i][c] - x[j][c]);
    return std::sqrt(s);
  };
  std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    std::vector<double> ds;
    for (int j = 0; j < n; ++j)
      if (j != i) ds.push_back(dist(i, j));
    std::sort(ds.begin(), ds.end());
    const double sigma = std::max(ds[knn - 1], 1e-8);
    for (int j = 0; j < n; ++j)
      if (j == i || dist(i, j) <= sigma) k[i][j] = std::exp(-(dist(i, j) / sigma) * (dist(i, j) / sigma));
  }
  std::vector<std::vector<double>> p(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    double deg = 0;
    for (int j = 0; j < n; ++j) deg += 0.5 * (k[i][j] + k[j][i]);
    for (int j = 0; j < n; ++j) p[i][j] = 0.5 * (k[i][j] + k[j][i]) / deg;
  }
  auto pt = p;
  for (int s = 1; s < t; ++s) {
    std::vector<std::vector<double>> next(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) next[i][j] += pt[i][m] * p[m][j];
    pt = next;
  }
  Matrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0;
      for (int m = 0; m < n; ++m) {
        const double a = -std::log(std::max(pt[i][m], 1e-12)), b = -std::log(std::max(pt[j][m], 1e-12));
        s += (a - b) * (a - b);
      }
      out(i, j) = std::sqrt(s);
    }
  return out;
}

}  // namespace

TEST(Phate, ThreeCollinearPointsMatchOracle) {
  Matrix pts(3, 2);
  pts << 0, 1, 1, 1, 2, 1;
  PhateOptions opts;
  opts.knn = 2;
  opts.t = 1;
  const auto dm = phate_distances(pts, opts);
  EXPECT_LT((dm.values() - phate_oracle(pts, 2, 1)).cwiseAbs().maxCoeff(), 1e-10);
  opts.t = 3;
  EXPECT_LT((phate_distances(pts, opts).values() - phate_oracle(pts, 2, 3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Phate, RandomCloudMatchesOracle) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix pts(30, 4);
  for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = n(rng) + 2.0;
  PhateOptions opts;
  opts.knn = 5;
  opts.t = 4;
  EXPECT_LT((phate_distances(pts, opts).values() - phate_oracle(pts, 5, 4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Phate, SymmetricZeroDiagonalAndDuplicatesAtZero) {
  auto task = synth::generate_corpus(synth::preset("weekdays-7"));
  std::vector<std::size_t> every_fifth;
  for (std::size_t i = 0; i < task.corpus.size(); i += 5) every_fifth.push_back(i);
  Matrix pts = rows_from(task.corpus.points, every_fifth);
  pts.row(150) = pts.row(3);
  pts.row(199) = pts.row(3);
  ASSERT_EQ(pts.rows(), 206);
  const auto res = phate_diffusion(pts);
  const Matrix& d = res.distances.values();
  EXPECT_EQ(d, d.transpose());
  EXPECT_EQ(d.diagonal().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(d(3, 150), 0.0);
  EXPECT_EQ(d(150, 199), 0.0);
  EXPECT_GT(d(3, 4), 0.0);
  EXPECT_GE(res.time.t, 1);
  EXPECT_LE(res.time.t, 64);
  EXPECT_NEAR((res.transition.rowwise().sum().array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
}

TEST(Phate, DisconnectedGraphRejected) {
  Matrix pts(8, 2);
  pts << 1, 0.00, 1, 0.01, 1, 0.02, 1, 0.03, 0, 1, 0.01, 1, 0.02, 1, 0.03, 1;
  PhateOptions opts;
  opts.knn = 2;
  try {
    phate_distances(pts, opts);
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("2 components"), std::string::npos) << e.what();
  }
}

TEST(Phate, TooFewPointsRejected) {
  EXPECT_THROW(phate_distances(Matrix::Ones(5, 3), PhateOptions{}), ContractViolation);
}

TEST(DiffusionTime, RankOneSpectrumIsFlatAndFlagged) {
  Vector lam = Vector::Zero(10);
  lam[0] = 1.0;
  const auto dt = select_diffusion_time(lam);
  EXPECT_EQ(dt.t, 1);
  EXPECT_TRUE(dt.flagged);
}

TEST(DiffusionTime, PermutationInvariant) {
  Vector lam(6);
  lam << 1.0, 0.8, 0.8, 0.5, 0.5, 0.1;
  Vector perm(6);
  perm << 0.5, 0.1, 0.8, 1.0, 0.5, 0.8;
  EXPECT_EQ(select_diffusion_time(lam).t, select_diffusion_time(perm).t);
}

TEST(DiffusionTime, GeometricSpectrumKnee) {
  Vector lam(50);
  for (Index k = 0; k < 50; ++k) lam[k] = std::pow(0.9, static_cast<double>(k));
  // Frozen from an independent brute-force H(t) table (t = 1..64).
  const auto dt = select_diffusion_time(lam);
  EXPECT_EQ(dt.t, 2);
  EXPECT_FALSE(dt.flagged);
  EXPECT_NEAR(dt.entropy[0], 3.21837176, 1e-8);
}

// ---------------------------------------------------------------------- PCA

TEST(Pca, ProjectLiftIdentities) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix pts(100, 6);
  for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = n(rng);
  const auto pca = fit_pca(pts, 3);
  EXPECT_LT((pca.components * pca.components.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
  for (int t = 0; t < 20; ++t) {
    Vector u(3);
    for (auto& x : u) x = n(rng);
    EXPECT_LT((pca.project(pca.lift(u)) - u).norm(), 1e-10);
  }
  for (Index k = 1; k < 3; ++k) EXPECT_GE(pca.explained_variance[k - 1], pca.explained_variance[k]);
}

TEST(Pca, PlanarDataReconstructed) {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix basis(2, 5);
  for (Index i = 0; i < basis.size(); ++i) basis.data()[i] = n(rng);
  Matrix coeffs(40, 2);
  for (Index i = 0; i < coeffs.size(); ++i) coeffs.data()[i] = n(rng);
  Vector offset(5);
  for (auto& x : offset) x = n(rng);
  const Matrix pts = (coeffs * basis).rowwise() + offset.transpose();
  const auto pca = fit_pca(pts, 2);
  for (Index i = 0; i < pts.rows(); ++i)
    EXPECT_LT((pca.lift(pca.project(pts.row(i).transpose())) - pts.row(i).transpose()).norm(), 1e-8);
}

TEST(Pca, ExplainedVarianceMatchesCovarianceEigenvalues) {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> n(0.0, 1.0);
  const Vector scales = vec({5.0, 3.0, 1.0, 0.5});
  Matrix pts(400, 4);
  for (Index i = 0; i < 400; ++i)
    for (Index c = 0; c < 4; ++c) pts(i, c) = scales[c] * n(rng);
  const auto pca = fit_pca(pts, 4);
  // Oracle: sample covariance eigenvalues through a general (non-symmetric) solver.
  const Matrix centered = pts.rowwise() - pts.colwise().mean();
  const Matrix cov = centered.transpose() * centered / 399.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(cov);
  Vector ev = es.eigenvalues().real();
  std::sort(ev.data(), ev.data() + 4, std::greater<>());
  EXPECT_LT((pca.explained_variance - ev).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pca, TooManyComponentsRejected) {
  EXPECT_THROW(fit_pca(Matrix::Random(3, 5), 4), ContractViolation);
}

TEST(SubspaceReplace, HandCase) {
  Matrix p(1, 2);
  p << 1, 0;
  EXPECT_EQ(subspace_replace(vec({3, 4}), vec({7}), p), vec({7, 4}));
  EXPECT_EQ(subspace_replace(vec({3, 4}), vec({3}), p), vec({3, 4}));
}

TEST(SubspaceReplace, ExactProjectionAndComplementOnRandomInstances) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const Index d = 3 + t % 10, m = 1 + t % (d - 1);
    Matrix a(d, d);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(a).householderQ();
    const Matrix p = q.leftCols(m).transpose();
    Vector h(d), w(m);
    for (auto& x : h) x = n(rng);
    for (auto& x : w) x = n(rng);
    const Vector inj = subspace_replace(h, w, p);
    EXPECT_LT((p * inj - w).cwiseAbs().maxCoeff(), 1e-12);
    const Matrix complement = Matrix::Identity(d, d) - p.transpose() * p;
    EXPECT_LT((complement * (inj - h)).norm(), 1e-12);
  }
}

TEST(SubspaceReplace, CenteredCoordinates) {
  auto task = synth::generate_corpus(synth::preset("weekdays-7"));
  const auto pca = fit_pca(task.corpus.points, 8);
  const Vector carrier = task.corpus.points.row(5).transpose();
  EXPECT_LT((subspace_replace_centered(carrier, pca.project(carrier), pca) - carrier).norm(), 1e-14);
  const Vector w = pca.project(task.corpus.points.row(900).transpose());
  EXPECT_LT((pca.project(subspace_replace_centered(carrier, w, pca)) - w).norm(), 1e-12);
}
