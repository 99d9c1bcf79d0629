#pragma once

#include "geosteer/diffcore/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace geosteer::diff {

struct LbfgsOptions {
  double lr = 1.0;
  int max_iter = 200;
  int max_eval = 0;  // 0 means 1.25 * max_iter
  double tolerance_grad = 1e-6;
  double tolerance_change = 1e-6;
  int history_size = 20;
  double clip_sup_norm = 1.0;  // <= 0 disables clipping
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 25;

  int eval_budget() const { return max_eval > 0 ? max_eval : max_iter * 5 / 4; }
};

/// Objective returning f(x) and writing its gradient into `grad`.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

enum class LbfgsStatus {
  running,
  gradient_tolerance,
  change_tolerance,
  max_iterations,
  max_evaluations,
  line_search_failed,
};

struct LbfgsResult {
  Vector x;
  double f = 0.0;
  std::vector<double> trace;  // f(x0) followed by f after each iteration
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::running;
  bool failed() const { return status == LbfgsStatus::line_search_failed; }
};

namespace detail {

// Minimizer of the cubic interpolating (x1,f1,g1), (x2,f2,g2), clamped to bounds.
inline double cubic_interpolate(double x1, double f1, double g1, double x2, double f2, double g2, double lo,
                                double hi) {
  const double d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
  const double d2_square = d1 * d1 - g1 * g2;
  if (d2_square >= 0.0) {
    const double d2 = std::sqrt(d2_square);
    double min_pos;
    if (x1 <= x2)
      min_pos = x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2));
    else
      min_pos = x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2));
    if (!std::isfinite(min_pos)) return 0.5 * (lo + hi);
    return std::min(std::max(min_pos, lo), hi);
  }
  return 0.5 * (lo + hi);
}

inline double cubic_interpolate(double x1, double f1, double g1, double x2, double f2, double g2) {
  return cubic_interpolate(x1, f1, g1, x2, f2, g2, std::min(x1, x2), std::max(x1, x2));
}

struct LineSearchOut {
  double f;
  Vector g;
  double t;
  int evals;
};

// Strong-Wolfe bracketing + zoom along x + t d, starting from step t.
inline LineSearchOut strong_wolfe(const Objective& obj, const Vector& x, double t, const Vector& d, double f,
                                  const Vector& g, double gtd, const LbfgsOptions& o) {
  constexpr double tolerance_change = 1e-9;
  const double d_norm = d.cwiseAbs().maxCoeff();
  auto eval = [&](double step, Vector& grad) { return obj(x + step * d, grad); };

  Vector g_new(x.size());
  double f_new = eval(t, g_new);
  int evals = 1;
  double gtd_new = g_new.dot(d);

  double t_prev = 0.0, f_prev = f, gtd_prev = gtd;
  Vector g_prev = g;
  bool done = false;
  int ls_iter = 0;

  double br[2] = {0, 0}, br_f[2] = {0, 0}, br_gtd[2] = {0, 0};
  Vector br_g[2];
  int n_br = 0;

  while (ls_iter < o.max_line_search) {
    if (!std::isfinite(f_new) || f_new > f + o.c1 * t * gtd || (ls_iter > 1 && f_new >= f_prev)) {
      br[0] = t_prev, br[1] = t;
      br_f[0] = f_prev, br_f[1] = f_new;
      br_g[0] = g_prev, br_g[1] = g_new;
      br_gtd[0] = gtd_prev, br_gtd[1] = gtd_new;
      n_br = 2;
      break;
    }
    if (std::abs(gtd_new) <= -o.c2 * gtd) {
      br[0] = t, br_f[0] = f_new, br_g[0] = g_new, br_gtd[0] = gtd_new;
      n_br = 1;
      done = true;
      break;
    }
    if (gtd_new >= 0) {
      br[0] = t_prev, br[1] = t;
      br_f[0] = f_prev, br_f[1] = f_new;
      br_g[0] = g_prev, br_g[1] = g_new;
      br_gtd[0] = gtd_prev, br_gtd[1] = gtd_new;
      n_br = 2;
      break;
    }
    const double min_step = t + 0.01 * (t - t_prev);
    const double max_step = t * 10.0;
    const double tmp = t;
    t = cubic_interpolate(t_prev, f_prev, gtd_prev, t, f_new, gtd_new, min_step, max_step);
    t_prev = tmp;
    f_prev = f_new;
    g_prev = g_new;
    gtd_prev = gtd_new;
    f_new = eval(t, g_new);
    ++evals;
    gtd_new = g_new.dot(d);
    ++ls_iter;
  }
  if (ls_iter == o.max_line_search) {
    br[0] = 0.0, br[1] = t;
    br_f[0] = f, br_f[1] = f_new;
    br_g[0] = g, br_g[1] = g_new;
    br_gtd[0] = gtd, br_gtd[1] = gtd_new;
    n_br = 2;
  }

  bool insufficient_progress = false;
  int low = 0, high = 1;
  if (n_br == 2 && br_f[0] > br_f[1]) low = 1, high = 0;
  while (!done && ls_iter < o.max_line_search) {
    if (std::abs(br[1] - br[0]) * d_norm < tolerance_change) break;
    const double bmax = std::max(br[0], br[1]), bmin = std::min(br[0], br[1]);
    t = cubic_interpolate(br[0], br_f[0], br_gtd[0], br[1], br_f[1], br_gtd[1]);
    const double eps = 0.1 * (bmax - bmin);
    if (std::min(bmax - t, t - bmin) < eps) {
      if (insufficient_progress || t >= bmax || t <= bmin) {
        t = std::abs(t - bmax) < std::abs(t - bmin) ? bmax - eps : bmin + eps;
        insufficient_progress = false;
      } else {
        insufficient_progress = true;
      }
    } else {
      insufficient_progress = false;
    }
    f_new = eval(t, g_new);
    ++evals;
    gtd_new = g_new.dot(d);
    ++ls_iter;

    if (!std::isfinite(f_new) || f_new > f + o.c1 * t * gtd || f_new >= br_f[low]) {
      br[high] = t, br_f[high] = f_new, br_g[high] = g_new, br_gtd[high] = gtd_new;
      if (br_f[0] <= br_f[1]) low = 0, high = 1;
      else low = 1, high = 0;
    } else {
      if (std::abs(gtd_new) <= -o.c2 * gtd) {
        done = true;
      } else if (gtd_new * (br[high] - br[low]) >= 0) {
        br[high] = br[low], br_f[high] = br_f[low], br_g[high] = br_g[low], br_gtd[high] = br_gtd[low];
      }
      br[low] = t, br_f[low] = f_new, br_g[low] = g_new, br_gtd[low] = gtd_new;
    }
  }
  if (n_br == 1) low = 0;
  return {br_f[low], br_g[low], br[low], evals};
}

}  // namespace detail

/// Stepwise limited-memory BFGS with strong-Wolfe line search.
///
/// Mirrors the iteration of torch.optim.LBFGS. The objective may be swapped
/// between iterations (call reevaluate() afterwards) which is how the
/// freeze-metric geodesic solver refreshes its frozen Jacobians.
class Lbfgs {
public:
  Lbfgs(Vector x0, LbfgsOptions opts = {}) : x_(std::move(x0)), opts_(opts) {
    require(opts_.lr > 0 && opts_.history_size > 0 && opts_.max_iter > 0, "Lbfgs: invalid options");
  }

  /// Evaluates f and its gradient at the current point under `obj`.
  void reevaluate(const Objective& obj) {
    g_.resize(x_.size());
    f_ = obj(x_, g_);
    ++evaluations_;
    if (!std::isfinite(f_) || !g_.allFinite()) throw NumericError("Lbfgs: objective is not finite at the current point");
    evaluated_ = true;
  }

  /// Moves to x and drops the curvature history, as for a fresh start.
  void restart(Vector x) {
    require(x.size() == x_.size(), "Lbfgs::restart: dimension mismatch");
    x_ = std::move(x);
    dirs_.clear();
    steps_.clear();
    rho_.clear();
    iterations_ = 0;
    evaluated_ = false;
  }

  /// True when the current gradient already satisfies the gradient tolerance.
  bool gradient_converged() const { return g_.cwiseAbs().maxCoeff() <= opts_.tolerance_grad; }

  /// One quasi-Newton iteration. Returns running while progress continues.
  LbfgsStatus iterate(const Objective& obj) {
    require(evaluated_, "Lbfgs::iterate: call reevaluate() first");
    if (gradient_converged()) return LbfgsStatus::gradient_tolerance;
    ++iterations_;

    if (iterations_ == 1) {
      h_diag_ = 1.0;
    } else {
      const Vector y = g_ - prev_g_;
      const Vector s = d_ * t_;
      const double ys = y.dot(s);
      if (ys > 1e-10) {
        if (static_cast<int>(dirs_.size()) == opts_.history_size) {
          dirs_.pop_front();
          steps_.pop_front();
          rho_.pop_front();
        }
        dirs_.push_back(y);
        steps_.push_back(s);
        rho_.push_back(1.0 / ys);
        h_diag_ = ys / y.dot(y);
      }
    }
    d_ = two_loop(clipped(g_));
    prev_g_ = g_;
    const double prev_f = f_;

    t_ = iterations_ == 1 ? std::min(1.0, 1.0 / g_.cwiseAbs().sum()) * opts_.lr : opts_.lr;
    const double gtd = g_.dot(d_);
    if (gtd > -opts_.tolerance_change) return LbfgsStatus::change_tolerance;

    auto ls = detail::strong_wolfe(obj, x_, t_, d_, f_, g_, gtd, opts_);
    evaluations_ += ls.evals;
    if (ls.t == 0.0 || !(ls.f < f_) || !std::isfinite(ls.f)) {
      t_ = 0.0;
      return LbfgsStatus::line_search_failed;
    }
    t_ = ls.t;
    x_ += t_ * d_;
    f_ = ls.f;
    g_ = std::move(ls.g);

    if (gradient_converged()) return LbfgsStatus::gradient_tolerance;
    if ((d_ * t_).cwiseAbs().maxCoeff() <= opts_.tolerance_change) return LbfgsStatus::change_tolerance;
    if (std::abs(f_ - prev_f) < opts_.tolerance_change) return LbfgsStatus::change_tolerance;
    return LbfgsStatus::running;
  }

  const Vector& x() const { return x_; }
  double f() const { return f_; }
  const Vector& gradient() const { return g_; }
  int iterations() const { return iterations_; }
  int evaluations() const { return evaluations_; }
  const LbfgsOptions& options() const { return opts_; }

private:
  Vector clipped(const Vector& g) const {
    if (opts_.clip_sup_norm <= 0) return g;
    const double sup = g.cwiseAbs().maxCoeff();
    return sup > opts_.clip_sup_norm ? Vector(g * (opts_.clip_sup_norm / sup)) : g;
  }

  Vector two_loop(const Vector& g) const {
    const std::size_t m = dirs_.size();
    Vector q = -g;
    std::vector<double> alpha(m);
    for (std::size_t i = m; i-- > 0;) {
      alpha[i] = steps_[i].dot(q) * rho_[i];
      q -= alpha[i] * dirs_[i];
    }
    Vector r = q * h_diag_;
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = dirs_[i].dot(r) * rho_[i];
      r += steps_[i] * (alpha[i] - beta);
    }
    return r;
  }

  Vector x_;
  LbfgsOptions opts_;
  double f_ = 0.0;
  Vector g_, prev_g_, d_;
  double t_ = 0.0;
  double h_diag_ = 1.0;
  std::deque<Vector> dirs_, steps_;
  std::deque<double> rho_;
  int iterations_ = 0;
  int evaluations_ = 0;
  bool evaluated_ = false;
};

/// Runs L-BFGS to termination on a fixed objective.
inline LbfgsResult lbfgs_minimize(const Objective& obj, const Vector& x0, const LbfgsOptions& opts = {}) {
  Lbfgs opt(x0, opts);
  try {
    opt.reevaluate(obj);
  } catch (const NumericError&) {
    throw ContractViolation("lbfgs_minimize: objective not finite at x0");
  }
  LbfgsResult res;
  res.trace.push_back(opt.f());
  LbfgsStatus status = opt.gradient_converged() ? LbfgsStatus::gradient_tolerance : LbfgsStatus::running;
  while (status == LbfgsStatus::running) {
    status = opt.iterate(obj);
    if (status != LbfgsStatus::line_search_failed) res.trace.push_back(opt.f());
    if (status != LbfgsStatus::running) break;
    if (opt.iterations() >= opts.max_iter) status = LbfgsStatus::max_iterations;
    else if (opt.evaluations() >= opts.eval_budget()) status = LbfgsStatus::max_evaluations;
  }
  res.x = opt.x();
  res.f = opt.f();
  res.iterations = opt.iterations();
  res.evaluations = opt.evaluations();
  res.status = status;
  return res;
}

}  // namespace geosteer::diff
