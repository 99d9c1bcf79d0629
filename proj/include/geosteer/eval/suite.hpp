#pragma once

#include "geosteer/eval/metrics.hpp"
#include "geosteer/synth/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <random>
#include <thread>

namespace geosteer::eval {

/// One steering method: a solver for class pairs plus its injection mode.
/// `solve` must be safe to call concurrently.
struct SteeringMethod {
  std::string name;    // linear, spline, gaga-phate, gaga-out, analytical
  std::string solver;  // closed-form, lbfgs, bridge
  bool subspace = true;
  std::function<solver::GeodesicPath(Index from, Index to)> solve;
};

struct SuiteOptions {
  std::size_t carriers = 16;
  std::uint64_t seed = 42;
  std::size_t all_pairs_up_to = 12;  // class count up to which every pair is used
  std::size_t sampled_pairs = 50;
  unsigned jobs = 1;
};

struct PairRow {
  std::string task, method, solver;
  Index from = 0, to = 0;
  double e_bc = 0.0, arc_len = 0.0, legibility = 0.0, target_prob_end = 0.0, top1_end = 0.0, visit_rate = 0.0;
  bool vacuous = false;
  bool flagged = false;
  std::string note;
};

struct MethodSummary {
  std::string method, solver;
  double e_bc = 0.0, arc_len = 0.0, legibility = 0.0, target_prob_end = 0.0, top1_end = 0.0, visit_rate = 0.0;
  std::size_t pairs = 0;
  std::size_t flagged = 0;
  std::string baseline;            // better baseline compared against, if any
  std::optional<TTest> vs_baseline;
  std::string test_note;
};

struct SteeringReport {
  std::string task;
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<std::size_t> carriers;  // corpus indices
  std::vector<PairRow> rows;          // method-major, then pair order
  std::vector<MethodSummary> summaries;
};

/// All unordered pairs when the class count is small, otherwise a seeded
/// sample without replacement; both in ascending order.
inline std::vector<std::pair<Index, Index>> select_pairs(std::size_t classes, const SuiteOptions& o) {
  require(classes >= 2, "select_pairs: need at least two classes");
  std::vector<std::pair<Index, Index>> all;
  for (Index i = 0; i < static_cast<Index>(classes); ++i)
    for (Index j = i + 1; j < static_cast<Index>(classes); ++j) all.emplace_back(i, j);
  if (classes <= o.all_pairs_up_to || all.size() <= o.sampled_pairs) return all;
  std::mt19937_64 rng(o.seed);
  for (std::size_t i = 0; i < o.sampled_pairs; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(o.sampled_pairs);
  std::sort(all.begin(), all.end());
  return all;
}

/// Carriers for one pair: a seeded sample of the validation split. The seed is
/// reset per pair, so every pair sees the same carriers.
inline std::vector<std::size_t> select_carriers(const std::vector<std::size_t>& val, const SuiteOptions& o) {
  require(!val.empty(), "select_carriers: empty validation split");
  std::vector<std::size_t> pool = val;
  const std::size_t take = std::min(o.carriers, pool.size());
  std::mt19937_64 rng(o.seed);
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(take);
  return pool;
}

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline bool is_baseline(const std::string& method) { return method == "linear" || method == "spline"; }

/// Steers every method over every selected pair, averages the metric panel
/// over carriers (direct injection ignores carriers), and compares each
/// non-baseline method against the baseline with the lower mean E_BC.
inline SteeringReport evaluate_suite(const std::string& task, const synth::ActivationCorpus& corpus,
                                     const synth::BehaviorHead& head, const geom::PcaModel& pca,
                                     const std::vector<SteeringMethod>& methods, const SuiteOptions& o = {}) {
  const spline::BehaviorManifold manifold = spline::build_behavior_manifold(
      output_centroids(corpus.points, corpus.labels, corpus.classes, head), corpus.topology);
  SteeringReport rep;
  rep.task = task;
  rep.pairs = select_pairs(corpus.classes, o);
  rep.carriers = select_carriers(corpus.val, o);
  const std::size_t np = rep.pairs.size();
  rep.rows.resize(methods.size() * np);

  parallel_for(rep.rows.size(), o.jobs, [&](std::size_t i) {
    const SteeringMethod& m = methods[i / np];
    const auto [from, to] = rep.pairs[i % np];
    PairRow& row = rep.rows[i];
    row.task = task, row.method = m.name, row.solver = m.solver, row.from = from, row.to = to;
    const solver::GeodesicPath path = m.solve(from, to);
    row.flagged = path.flagged;
    row.note = path.note;
    std::vector<Injection> injections;
    if (m.subspace)
      for (auto c : rep.carriers) injections.push_back(Injection::subspace(pca, row_vector(corpus.points, static_cast<Index>(c))));
    else
      injections.push_back(Injection::direct());
    for (const auto& inj : injections) {
      const BehaviorTrajectory tr = steer_and_record(path, head, inj);
      const Energy e = energy_bc(tr, manifold);
      if (e.infinite_at) {
        row.flagged = true;
        row.note = "infinite E_BC at waypoint " + std::to_string(*e.infinite_at);
      }
      const VisitRate v = visit_intermediates(tr, from, to, corpus.topology);
      row.e_bc += e.value;
      row.arc_len += arc_length_behavior(tr);
      row.legibility += legibility(tr);
      row.target_prob_end += target_prob_end(tr, to);
      row.top1_end += top1_at_end(tr, to) ? 1.0 : 0.0;
      row.visit_rate += v.rate;
      row.vacuous = v.vacuous;
    }
    const double n = static_cast<double>(injections.size());
    for (double PairRow::*f : {&PairRow::e_bc, &PairRow::arc_len, &PairRow::legibility, &PairRow::target_prob_end,
                               &PairRow::top1_end, &PairRow::visit_rate})
      row.*f /= n;
  });

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MethodSummary s;
    s.method = methods[mi].name;
    s.solver = methods[mi].solver;
    s.pairs = np;
    for (std::size_t p = 0; p < np; ++p) {
      const PairRow& r = rep.rows[mi * np + p];
      for (auto [dst, src] : {std::pair{&MethodSummary::e_bc, &PairRow::e_bc}, {&MethodSummary::arc_len, &PairRow::arc_len},
                              {&MethodSummary::legibility, &PairRow::legibility},
                              {&MethodSummary::target_prob_end, &PairRow::target_prob_end},
                              {&MethodSummary::top1_end, &PairRow::top1_end},
                              {&MethodSummary::visit_rate, &PairRow::visit_rate}})
        s.*dst += r.*src;
      s.flagged += r.flagged ? 1 : 0;
    }
    for (double MethodSummary::*f : {&MethodSummary::e_bc, &MethodSummary::arc_len, &MethodSummary::legibility,
                                     &MethodSummary::target_prob_end, &MethodSummary::top1_end,
                                     &MethodSummary::visit_rate})
      s.*f /= static_cast<double>(np);
    rep.summaries.push_back(std::move(s));
  }

  auto e_bc_of = [&](std::size_t mi) {
    std::vector<double> out;
    for (std::size_t p = 0; p < np; ++p) out.push_back(rep.rows[mi * np + p].e_bc);
    return out;
  };
  std::optional<std::size_t> better;
  for (std::size_t mi = 0; mi < methods.size(); ++mi)
    if (is_baseline(methods[mi].name) && (!better || rep.summaries[mi].e_bc < rep.summaries[*better].e_bc)) better = mi;
  if (better) {
    const auto base_col = e_bc_of(*better);
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      MethodSummary& s = rep.summaries[mi];
      if (is_baseline(s.method)) continue;
      s.baseline = rep.summaries[*better].method;
      try {
        s.vs_baseline = paired_t_test(e_bc_of(mi), base_col);
      } catch (const ContractViolation& e) {
        s.test_note = e.what();
      }
    }
  }
  return rep;
}

}  // namespace geosteer::eval
