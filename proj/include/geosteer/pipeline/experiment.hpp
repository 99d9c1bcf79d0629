#pragma once

#include "geosteer/encoder/train.hpp"
#include "geosteer/eval/suite.hpp"
#include "geosteer/geom/phate.hpp"
#include "geosteer/metricspace/metric_field.hpp"
#include "geosteer/solver/bridge.hpp"
#include "geosteer/solver/geodesic.hpp"
#include "geosteer/spline/cubic_spline.hpp"
#include "geosteer/synth/task.hpp"

#include <map>

namespace geosteer::pipeline {

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"linear", "spline", "gaga-phate", "gaga-out", "analytical"};
  return names;
}

/// Solvers a method accepts: closed-form for the baselines, L-BFGS for every
/// pullback metric, the bridge for encoder metrics only.
inline std::vector<std::string> compatible_solvers(const std::string& method) {
  if (method == "linear" || method == "spline") return {"closed-form"};
  if (method == "gaga-phate" || method == "gaga-out") return {"lbfgs", "bridge"};
  if (method == "analytical") return {"lbfgs"};
  throw ContractViolation("unknown method '" + method + "'");
}

inline std::string default_solver(const std::string& method) { return compatible_solvers(method).front(); }

inline void require_compatible(const std::string& method, const std::string& solver) {
  const auto ok = compatible_solvers(method);
  if (std::find(ok.begin(), ok.end(), solver) != ok.end()) return;
  std::string list;
  for (const auto& s : ok) list += (list.empty() ? "" : ", ") + s;
  throw ContractViolation("method '" + method + "' cannot use solver '" + solver + "' (allowed: " + list + ")");
}

struct MethodChoice {
  std::string method;
  std::string solver;
};

struct ExperimentConfig {
  synth::TaskSpec task = synth::preset("weekdays-7");
  std::vector<MethodChoice> methods{{"linear", "closed-form"},
                                    {"spline", "closed-form"},
                                    {"gaga-phate", "lbfgs"},
                                    {"gaga-out", "lbfgs"},
                                    {"analytical", "lbfgs"}};
  Index pca_rank = 8;
  Index waypoints = solver::kDefaultWaypoints;
  double epsilon = metric::kDefaultEpsilon;
  geom::PhateOptions phate;
  encoder::TrainConfig gaga_phate = encoder::TrainConfig::gaga_phate();
  std::optional<encoder::TrainConfig> gaga_out;  // unset: TrainConfig::gaga_out(K)
  solver::LbfgsGeodesicOptions lbfgs;
  solver::BridgeConfig bridge;
  eval::SuiteOptions suite;

  encoder::TrainConfig gaga_out_config() const {
    return gaga_out ? *gaga_out : encoder::TrainConfig::gaga_out(static_cast<Index>(task.classes));
  }

  void validate() const {
    task.validate();
    require(!methods.empty(), "ExperimentConfig: no methods");
    for (const auto& m : methods) require_compatible(m.method, m.solver);
    require(pca_rank >= 1 && pca_rank <= static_cast<Index>(task.ambient_dim),
            "ExperimentConfig: PCA rank must lie in [1, ambient dimension]");
    require(waypoints >= 1, "ExperimentConfig: need at least one segment");
    require(epsilon >= 0.0, "ExperimentConfig: negative metric regularizer");
  }

  bool uses(const std::string& method) const {
    return std::any_of(methods.begin(), methods.end(), [&](const MethodChoice& m) { return m.method == method; });
  }
  bool uses(const std::string& method, const std::string& solver) const {
    return std::any_of(methods.begin(), methods.end(),
                       [&](const MethodChoice& m) { return m.method == method && m.solver == solver; });
  }
};

/// Corpus plus the principal subspace shared by the PCA-space methods.
struct PreparedTask {
  synth::SyntheticTask task;
  geom::PcaModel pca;
  Matrix projected;        // corpus in principal coordinates
  Matrix raw_centroids;    // K x D class means
  Matrix pca_centroids;    // K x m class means of projected points
  Vector canonical_carrier;  // first validation point
};

inline PreparedTask prepare_task(synth::SyntheticTask task, geom::PcaModel pca) {
  PreparedTask p;
  p.task = std::move(task);
  p.pca = std::move(pca);
  require(p.pca.dim() == p.task.corpus.points.cols(), "prepare_task: PCA model does not match the corpus dimension");
  p.projected = p.pca.project_rows(p.task.corpus.points);
  p.raw_centroids = synth::class_centroids(p.task.corpus);
  p.pca_centroids = p.pca.project_rows(p.raw_centroids);
  p.canonical_carrier = row_vector(p.task.corpus.points, static_cast<Index>(p.task.corpus.val.front()));
  return p;
}

inline PreparedTask prepare_task(const synth::TaskSpec& spec, Index pca_rank) {
  synth::SyntheticTask task = synth::generate_corpus(spec);
  geom::PcaModel pca = geom::fit_pca(task.corpus.points, pca_rank);
  return prepare_task(std::move(task), std::move(pca));
}

inline geom::DistanceMatrix gaga_out_distances(const PreparedTask& p) {
  return geom::output_hellinger_matrix(p.task.corpus.points, p.task.head);
}

inline geom::DistanceMatrix gaga_phate_distances(const PreparedTask& p, const geom::PhateOptions& phate) {
  return geom::phate_distances(p.projected, phate);
}

/// GAGA-Out: raw activations, output-Hellinger supervision, pointwise targets.
inline encoder::TrainResult train_gaga_out(const PreparedTask& p, const geom::DistanceMatrix& d,
                                           const encoder::TrainConfig& cfg) {
  const auto& c = p.task.corpus;
  const Matrix targets = encoder::pointwise_targets(p.task.head.eval_rows(c.points), static_cast<Index>(c.classes));
  encoder::TrainResult r = encoder::train_encoder(synth::UnlabeledView(c), d, cfg, cfg.lambda_pw > 0.0 ? &targets : nullptr);
  r.model.ambient = "raw";
  return r;
}

/// Encoders on principal coordinates: GAGA-PHATE and the sweep variants.
inline encoder::TrainResult train_pca_encoder(const PreparedTask& p, const std::optional<geom::DistanceMatrix>& d,
                                              const encoder::TrainConfig& cfg) {
  const auto& c = p.task.corpus;
  encoder::TrainResult r = encoder::train_encoder(synth::UnlabeledView(p.projected, c.train, c.val), d, cfg);
  r.model.ambient = "pca-" + std::to_string(p.pca.rank());
  return r;
}

/// Trained artifacts the methods draw on; unset members are not needed.
struct Artifacts {
  std::shared_ptr<const encoder::EncoderModel> gaga_out, gaga_phate;
  std::shared_ptr<const solver::BridgeModel> gaga_out_bridge, gaga_phate_bridge;
};

inline Artifacts train_artifacts(const PreparedTask& p, const ExperimentConfig& cfg) {
  Artifacts a;
  if (cfg.uses("gaga-out"))
    a.gaga_out = std::make_shared<encoder::EncoderModel>(train_gaga_out(p, gaga_out_distances(p), cfg.gaga_out_config()).model);
  if (cfg.uses("gaga-phate"))
    a.gaga_phate =
        std::make_shared<encoder::EncoderModel>(train_pca_encoder(p, gaga_phate_distances(p, cfg.phate), cfg.gaga_phate).model);
  if (cfg.uses("gaga-out", "bridge"))
    a.gaga_out_bridge = std::make_shared<solver::BridgeModel>(
        solver::train_bridge(rows_from(p.task.corpus.points, p.task.corpus.train), a.gaga_out, cfg.bridge));
  if (cfg.uses("gaga-phate", "bridge"))
    a.gaga_phate_bridge = std::make_shared<solver::BridgeModel>(
        solver::train_bridge(rows_from(p.projected, p.task.corpus.train), a.gaga_phate, cfg.bridge));
  return a;
}

/// Steering method for one (method, solver) choice. PCA-space methods run
/// between principal-coordinate centroids with subspace injection; GAGA-Out
/// runs between raw centroids with direct injection.
inline eval::SteeringMethod make_method(const MethodChoice& choice, const PreparedTask& p, const Artifacts& a,
                                        const ExperimentConfig& cfg) {
  require_compatible(choice.method, choice.solver);
  eval::SteeringMethod m{choice.method, choice.solver, choice.method != "gaga-out", {}};
  const Index k = cfg.waypoints;
  const Matrix& ends = m.subspace ? p.pca_centroids : p.raw_centroids;
  auto endpoint = [&ends](Index c) { return row_vector(ends, c); };

  if (choice.method == "linear") {
    m.solve = [endpoint, k](Index i, Index j) { return solver::linear_geodesic(endpoint(i), endpoint(j), k); };
    return m;
  }
  if (choice.method == "spline") {
    auto s = std::make_shared<spline::CubicSpline>(p.pca_centroids, spline::boundary_for(p.task.corpus.topology));
    m.solve = [s, k](Index i, Index j) { return spline::spline_geodesic(*s, i, j, k); };
    return m;
  }

  std::shared_ptr<const encoder::EncoderModel> enc;
  std::shared_ptr<const solver::BridgeModel> bridge;
  if (choice.method == "gaga-out") enc = a.gaga_out, bridge = a.gaga_out_bridge;
  if (choice.method == "gaga-phate") enc = a.gaga_phate, bridge = a.gaga_phate_bridge;

  if (choice.solver == "bridge") {
    require(bridge != nullptr, "make_method: " + choice.method + " bridge has not been trained");
    m.solve = [bridge, endpoint, k](Index i, Index j) { return solver::bridge_geodesic(*bridge, endpoint(i), endpoint(j), k); };
    return m;
  }

  auto field = std::make_shared<metric::MetricField>(
      choice.method == "analytical"
          ? metric::MetricField::analytical(std::make_shared<synth::BehaviorHead>(p.task.head), cfg.epsilon,
                                            metric::SubspaceLift{p.pca, p.canonical_carrier})
          : (require(enc != nullptr, "make_method: " + choice.method + " encoder has not been trained"),
             metric::MetricField::encoder(enc, cfg.epsilon)));
  solver::LbfgsGeodesicOptions opts = cfg.lbfgs;
  opts.waypoints = k;
  m.solve = [field, endpoint, opts](Index i, Index j) { return solver::lbfgs_geodesic(endpoint(i), endpoint(j), *field, opts); };
  return m;
}

struct ExperimentResult {
  PreparedTask prepared;
  Artifacts artifacts;
  eval::SteeringReport report;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult r;
  r.prepared = prepare_task(cfg.task, cfg.pca_rank);
  r.artifacts = train_artifacts(r.prepared, cfg);
  std::vector<eval::SteeringMethod> methods;
  for (const auto& c : cfg.methods) methods.push_back(make_method(c, r.prepared, r.artifacts, cfg));
  r.report = eval::evaluate_suite(cfg.task.name, r.prepared.task.corpus, r.prepared.task.head, r.prepared.pca, methods,
                                  cfg.suite);
  return r;
}

}  // namespace geosteer::pipeline
