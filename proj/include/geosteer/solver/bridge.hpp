#pragma once

#include "geosteer/diffcore/adamw.hpp"
#include "geosteer/diffcore/graph.hpp"
#include "geosteer/solver/geodesic.hpp"

#include <memory>
#include <random>

namespace geosteer::solver {

/// 1 - (2t - 1)^q; vanishes at t = 0 and t = 1 for even q.
inline double envelope(double t, int q) {
  require(q >= 2 && q % 2 == 0, "envelope: exponent must be even and at least 2, got " + std::to_string(q));
  require(t >= 0.0 && t <= 1.0, "envelope: t outside [0, 1]");
  return 1.0 - std::pow(2.0 * t - 1.0, q);
}

/// Isotropic Gaussian kernel density estimate without the normalizing
/// constant, which would under- or overflow in high dimension.
class GaussianKde {
public:
  static constexpr double kMaxLogInverse = 50.0;

  /// Scott's rule: bandwidth n^(-1/(d+4)) times the root mean per-dimension
  /// sample variance.
  explicit GaussianKde(Matrix points) : points_(std::move(points)) {
    const Index n = points_.rows(), d = points_.cols();
    require(n >= 2, "GaussianKde: need at least two points, got " + std::to_string(n));
    require(points_.allFinite(), "GaussianKde: non-finite point");
    const RowVector mean = points_.colwise().mean();
    const double var = (points_.rowwise() - mean).squaredNorm() / static_cast<double>((n - 1) * d);
    require(var > 0.0, "GaussianKde: points are all identical");
    bandwidth_ = std::pow(static_cast<double>(n), -1.0 / static_cast<double>(d + 4)) * std::sqrt(var);
  }

  double bandwidth() const { return bandwidth_; }
  Index size() const { return points_.rows(); }

  /// log of the mean kernel value; writes its gradient when asked.
  double log_density(const Vector& x, Vector* grad = nullptr) const {
    require(x.size() == points_.cols(), "GaussianKde: dimension mismatch");
    const double inv2h2 = 0.5 / (bandwidth_ * bandwidth_);
    const Vector e = -(points_.rowwise() - x.transpose()).rowwise().squaredNorm() * inv2h2;
    const double top = e.maxCoeff();
    const Vector w = exp_elementwise(e.array() - top).matrix();
    const double s = w.sum();
    if (grad) *grad = (points_.transpose() * w / s - x) * (2.0 * inv2h2);
    return top + std::log(s / static_cast<double>(points_.rows()));
  }

  /// 1 / density, capped at exp(kMaxLogInverse); past the cap the gradient
  /// keeps its direction at the capped scale.
  double inverse_density(const Vector& x, Vector* grad = nullptr) const {
    Vector g;
    const double logd = log_density(x, grad ? &g : nullptr);
    const double inv = std::exp(std::min(-logd, kMaxLogInverse));
    if (grad) *grad = -inv * g;
    return inv;
  }

private:
  Matrix points_;
  double bandwidth_ = 1.0;
};

struct BridgeConfig {
  Index width = 256;
  int layers = 4;
  int envelope_q = 4;
  long steps = 50000;
  Index batch = 64;
  Index time_steps = 32;
  double lr = 1e-3;
  double mu = 0.05;
  double epsilon = metric::kDefaultEpsilon;
  std::uint64_t seed = 42;

  void validate() const {
    require(width >= 1 && layers >= 2, "BridgeConfig: need at least two layers of positive width");
    require(envelope_q >= 2 && envelope_q % 2 == 0, "BridgeConfig: envelope exponent must be even");
    require(steps >= 0 && batch >= 1 && time_steps >= 1, "BridgeConfig: steps, batch and time steps must be positive");
    require(lr > 0.0 && mu >= 0.0 && epsilon >= 0.0, "BridgeConfig: invalid lr, mu or epsilon");
  }
};

/// Amortized curve c(h0, h1, t) = h0 + t (h1 - h0) + envelope(t) net(phi(h0), phi(h1), t).
struct BridgeModel {
  std::shared_ptr<const encoder::EncoderModel> encoder;
  std::vector<encoder::Dense> layers;  // ReLU between layers
  int envelope_q = 4;
  std::vector<double> loss_trace;

  Index ambient_dim() const { return layers.back().out(); }

  Matrix inputs(const Vector& h0, const Vector& h1, const std::vector<double>& ts) const {
    const Vector z0 = encoder->encode(h0), z1 = encoder->encode(h1);
    const Index k = z0.size();
    Matrix x(static_cast<Index>(ts.size()), 2 * k + 1);
    for (Index r = 0; r < x.rows(); ++r) {
      x.row(r).head(k) = z0.transpose();
      x.row(r).segment(k, k) = z1.transpose();
      x(r, 2 * k) = ts[static_cast<std::size_t>(r)];
    }
    return x;
  }

  Matrix correction(const Matrix& x) const {
    Matrix a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Matrix z = (a * layers[l].weight).rowwise() + layers[l].bias.row(0);
      a = l + 1 < layers.size() ? Matrix(z.cwiseMax(0.0)) : z;
    }
    return a;
  }

  /// Curve points at the given times, one row each; t = 0 and t = 1 return
  /// the endpoints exactly.
  Matrix curve(const Vector& h0, const Vector& h1, const std::vector<double>& ts) const {
    require(h0.size() == ambient_dim() && h1.size() == ambient_dim(), "BridgeModel: endpoint dimension mismatch");
    const Matrix net = correction(inputs(h0, h1, ts));
    Matrix c(net.rows(), ambient_dim());
    for (Index r = 0; r < c.rows(); ++r) {
      const double t = ts[static_cast<std::size_t>(r)];
      if (t == 0.0) c.row(r) = h0.transpose();
      else if (t == 1.0) c.row(r) = h1.transpose();
      else c.row(r) = (h0 + t * (h1 - h0)).transpose() + envelope(t, envelope_q) * net.row(r);
    }
    return c;
  }
};

inline std::vector<double> uniform_times(Index segments) {
  std::vector<double> ts(static_cast<std::size_t>(segments + 1));
  for (Index j = 0; j <= segments; ++j) ts[static_cast<std::size_t>(j)] = static_cast<double>(j) / static_cast<double>(segments);
  ts.back() = 1.0;
  return ts;
}

/// Fresh bridge: uniform(+-1/sqrt(in)) hidden layers and a zero last layer,
/// so the initial curve is the chord.
inline BridgeModel make_bridge(std::shared_ptr<const encoder::EncoderModel> enc, const BridgeConfig& cfg) {
  cfg.validate();
  require(enc != nullptr, "make_bridge: null encoder");
  BridgeModel b;
  b.encoder = std::move(enc);
  b.envelope_q = cfg.envelope_q;
  std::mt19937_64 rng(cfg.seed);
  std::vector<Index> widths{2 * b.encoder->latent_dim() + 1};
  for (int l = 0; l + 1 < cfg.layers; ++l) widths.push_back(cfg.width);
  widths.push_back(b.encoder->ambient_dim());
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    encoder::Dense d{Matrix::Zero(widths[l], widths[l + 1]), Matrix::Zero(1, widths[l + 1])};
    if (l + 2 < widths.size()) {
      std::uniform_real_distribution<double> u(-1.0 / std::sqrt(static_cast<double>(widths[l])),
                                               1.0 / std::sqrt(static_cast<double>(widths[l])));
      for (Index i = 0; i < d.weight.size(); ++i) d.weight.data()[i] = u(rng);
      for (Index i = 0; i < d.bias.size(); ++i) d.bias.data()[i] = u(rng);
    }
    b.layers.push_back(std::move(d));
  }
  return b;
}

/// Loss of one curve (frozen-metric length plus mu times the mean inverse
/// density over its points) and its gradient with respect to the points.
inline double bridge_curve_loss(const Matrix& c, const metric::MetricField& m, const GaussianKde& kde, double mu,
                                Matrix& grad) {
  const std::vector<Matrix> factors = segment_factors(c, m);
  double loss = frozen_length(c, factors, m.epsilon(), &grad);
  if (mu > 0.0) {
    const double w = mu / static_cast<double>(c.rows());
    Vector g;
    for (Index r = 0; r < c.rows(); ++r) {
      loss += w * kde.inverse_density(row_vector(c, r), &g);
      grad.row(r) += w * g.transpose();
    }
  }
  return loss;
}

/// Mean loss over a batch of endpoint pairs. When `grads` is given it
/// receives d loss / d parameter for every layer as (weight, bias) pairs.
inline double bridge_batch_loss(const BridgeModel& b, const Matrix& points,
                                const std::vector<std::pair<Index, Index>>& pairs, const std::vector<double>& ts,
                                const metric::MetricField& m, const GaussianKde& kde, double mu,
                                std::vector<Matrix>* grads = nullptr) {
  const Index per = static_cast<Index>(ts.size()), dim = b.ambient_dim();
  const double batch = static_cast<double>(pairs.size());
  Matrix x(static_cast<Index>(pairs.size()) * per, 2 * b.encoder->latent_dim() + 1);
  for (std::size_t p = 0; p < pairs.size(); ++p)
    x.middleRows(static_cast<Index>(p) * per, per) =
        b.inputs(row_vector(points, pairs[p].first), row_vector(points, pairs[p].second), ts);
  diff::Graph g;
  std::vector<diff::Var> vars;
  diff::Var a = g.constant(x);
  for (std::size_t l = 0; l < b.layers.size(); ++l) {
    vars.push_back(g.parameter(b.layers[l].weight));
    vars.push_back(g.parameter(b.layers[l].bias));
    a = diff::add(diff::matmul(a, vars[2 * l]), vars[2 * l + 1]);
    if (l + 1 < b.layers.size()) a = diff::relu(a);
  }
  const Matrix& net = a.value();
  Matrix upstream(net.rows(), dim);
  double loss = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const Vector h0 = row_vector(points, pairs[p].first), h1 = row_vector(points, pairs[p].second);
    const Index base = static_cast<Index>(p) * per;
    Matrix c(per, dim);
    for (Index r = 0; r < per; ++r) {
      const double t = ts[static_cast<std::size_t>(r)];
      c.row(r) = (h0 + t * (h1 - h0)).transpose() + envelope(t, b.envelope_q) * net.row(base + r);
    }
    Matrix grad;
    loss += bridge_curve_loss(c, m, kde, mu, grad) / batch;
    for (Index r = 0; r < per; ++r)
      upstream.row(base + r) = grad.row(r) * (envelope(ts[static_cast<std::size_t>(r)], b.envelope_q) / batch);
  }
  if (grads) {
    // d loss / d net is known, so a linear surrogate carries it back.
    g.backward(diff::sum(diff::mul(a, g.constant(upstream))));
    grads->clear();
    for (const auto& v : vars) grads->push_back(v.grad());
  }
  return loss;
}

/// Trains the correction network with Adam on random endpoint pairs drawn
/// from `points`; the metric is the encoder pullback with J held fixed per
/// step.
inline BridgeModel train_bridge(const Matrix& points, std::shared_ptr<const encoder::EncoderModel> enc,
                                const BridgeConfig& cfg) {
  cfg.validate();
  const GaussianKde kde(points);
  BridgeModel b = make_bridge(enc, cfg);
  require(points.cols() == b.ambient_dim(), "train_bridge: points do not match the encoder's ambient dimension");
  const metric::MetricField m = metric::MetricField::encoder(b.encoder, cfg.epsilon);
  const std::vector<double> ts = uniform_times(cfg.time_steps);
  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
  std::uniform_int_distribution<Index> pick(0, points.rows() - 1);
  diff::AdamW opt({0.9, 0.999, 1e-8, 0.0});
  std::vector<Matrix> grads;

  for (long step = 0; step < cfg.steps; ++step) {
    std::vector<std::pair<Index, Index>> pairs;
    for (Index p = 0; p < cfg.batch; ++p) {
      const Index i = pick(rng);
      Index j = pick(rng);
      while (j == i) j = pick(rng);
      pairs.emplace_back(i, j);
    }
    const double loss = bridge_batch_loss(b, points, pairs, ts, m, kde, cfg.mu, &grads);
    if (!std::isfinite(loss)) throw NumericError("train_bridge: non-finite loss at step " + std::to_string(step));
    std::vector<Matrix*> params;
    std::vector<const Matrix*> gp;
    for (std::size_t l = 0; l < b.layers.size(); ++l) {
      params.insert(params.end(), {&b.layers[l].weight, &b.layers[l].bias});
      gp.insert(gp.end(), {&grads[2 * l], &grads[2 * l + 1]});
    }
    opt.step(params, gp, cfg.lr);
    b.loss_trace.push_back(loss);
  }
  return b;
}

/// Bridge curve at K + 1 uniform times.
inline GeodesicPath bridge_geodesic(const BridgeModel& b, const Vector& h0, const Vector& h1,
                                    Index k = kDefaultWaypoints) {
  require_waypoint_count(k);
  require_endpoints(h0, h1, "bridge_geodesic");
  GeodesicPath path;
  path.solver = "bridge";
  path.waypoints = b.curve(h0, h1, uniform_times(k));
  return path;
}

}  // namespace geosteer::solver
