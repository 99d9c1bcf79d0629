#pragma once

#include "geosteer/io/checkpoint.hpp"
#include "geosteer/io/corpus_file.hpp"
#include "geosteer/io/matrix_file.hpp"
#include "geosteer/pipeline/config.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>

namespace geosteer::pipeline {

/// A stage could not run: missing or stale upstream artifacts, or a failure
/// while computing.
class StageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string out = "out";
  unsigned jobs = 1;
  bool verbose = false;
  std::ostream* log = &std::cerr;
};

inline std::string path_artifact(const MethodChoice& m) { return "paths-" + m.method + "-" + m.solver + ".gpth"; }

/// Content hash of every artifact, derived from the config alone. Each key
/// covers the config subsection feeding the artifact plus its upstream keys.
struct ArtifactKeys {
  std::string corpus, pca, dist_out, dist_phate, enc_out, enc_phate, bridge_out, bridge_phate, report, sweep;
  std::map<std::string, std::string> paths;  // by artifact file name
};

inline ArtifactKeys artifact_keys(const PipelineConfig& pc) {
  const Json j = to_json(pc);
  ArtifactKeys k;
  k.corpus = hash_hex({{"task", j["task"]}});
  k.pca = hash_hex({{"corpus", k.corpus}, {"pca_rank", j["pca_rank"]}});
  k.dist_out = hash_hex({{"corpus", k.corpus}, {"source", "output-hellinger"}});
  k.dist_phate = hash_hex({{"pca", k.pca}, {"phate", j["phate"]}});
  k.enc_out = hash_hex({{"distances", k.dist_out}, {"train", j["gaga_out"]}});
  k.enc_phate = hash_hex({{"distances", k.dist_phate}, {"train", j["gaga_phate"]}});
  k.bridge_out = hash_hex({{"encoder", k.enc_out}, {"bridge", j["bridge"]}});
  k.bridge_phate = hash_hex({{"encoder", k.enc_phate}, {"bridge", j["bridge"]}});
  const Json pairs = {{"seed", j["suite"]["seed"]},
                      {"all_pairs_up_to", j["suite"]["all_pairs_up_to"]},
                      {"sampled_pairs", j["suite"]["sampled_pairs"]}};
  Json report = {{"suite", j["suite"]}, {"paths", Json::array()}};
  for (const auto& m : pc.experiment.methods) {
    Json key = {{"method", m.method}, {"solver", m.solver}, {"corpus", k.corpus}, {"pca", k.pca},
                {"waypoints", j["waypoints"]}, {"pairs", pairs}};
    if (m.method == "gaga-out") key["model"] = m.solver == "bridge" ? k.bridge_out : k.enc_out;
    if (m.method == "gaga-phate") key["model"] = m.solver == "bridge" ? k.bridge_phate : k.enc_phate;
    if (m.solver == "lbfgs") key["lbfgs"] = j["lbfgs"], key["epsilon"] = j["epsilon"];
    const std::string name = path_artifact(m);
    k.paths[name] = hash_hex(key);
    report["paths"].push_back({name, k.paths[name]});
  }
  k.report = hash_hex(report);
  k.sweep = hash_hex({{"pca", k.pca}, {"phate", j["phate"]}, {"sweep", j["sweep"]}, {"lbfgs", j["lbfgs"]},
                      {"epsilon", j["epsilon"]}, {"waypoints", j["waypoints"]}, {"suite", j["suite"]}});
  return k;
}

/// Output directory of artifacts, each with a `<name>.meta` sidecar holding
/// at least its config hash and producing stage.
class ArtifactStore {
public:
  explicit ArtifactStore(std::string dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  std::string file(const std::string& name) const { return (std::filesystem::path(dir_) / name).string(); }

  bool fresh(const std::string& name, const std::string& hash) const {
    if (!std::filesystem::exists(file(name)) || !std::filesystem::exists(file(name) + ".meta")) return false;
    try {
      const io::Meta m = io::load_meta(file(name) + ".meta");
      const auto it = m.find("config_hash");
      return it != m.end() && it->second == hash;
    } catch (const io::FormatError&) {
      return false;
    }
  }

  void require_fresh(const std::string& name, const std::string& hash, const std::string& stage) const {
    if (!std::filesystem::exists(file(name)))
      throw StageError("missing upstream artifact '" + name + "' (run stage '" + stage + "' first)");
    if (!fresh(name, hash))
      throw StageError("upstream artifact '" + name + "' is stale for this config (rerun stage '" + stage + "')");
  }

  void stamp(const std::string& name, const std::string& hash, const std::string& stage, io::Meta extra = {}) const {
    extra["config_hash"] = hash;
    extra["stage"] = stage;
    io::save_meta(file(name) + ".meta", extra);
  }

  const std::string& dir() const { return dir_; }

private:
  std::string dir_;
};

namespace detail {

class StageLog {
public:
  StageLog(const RunOptions& o, std::string stage)
      : o_(o), stage_(std::move(stage)), t0_(std::chrono::steady_clock::now()) {}

  void cached(const std::string& name) const {
    if (o_.log) *o_.log << "[" << stage_ << "] up to date: " << name << "\n";
  }
  void wrote(const std::string& name) const {
    if (o_.log) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f", seconds());
      *o_.log << "[" << stage_ << "] wrote " << name << " (" << buf << " s)\n";
    }
  }
  void detail(const std::string& msg) const {
    if (o_.log && o_.verbose) *o_.log << "[" << stage_ << "]   " << msg << "\n";
  }
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
  const RunOptions& o_;
  std::string stage_;
  std::chrono::steady_clock::time_point t0_;
};

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StageError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw StageError("write failed for '" + path + "'");
}

inline PreparedTask load_prepared(const PipelineConfig& pc, const ArtifactStore& store, const ArtifactKeys& k) {
  store.require_fresh("corpus.gact", k.corpus, "gen");
  store.require_fresh("head.ckpt", k.corpus, "gen");
  store.require_fresh("pca.ckpt", k.pca, "dist");
  synth::SyntheticTask task;
  task.spec = pc.experiment.task;
  task.corpus = io::load_corpus(store.file("corpus.gact"));
  task.head = io::decode_head(io::decode_checkpoint(io::load_bytes(store.file("head.ckpt")), "head.ckpt"));
  geom::PcaModel pca = io::decode_pca(io::decode_checkpoint(io::load_bytes(store.file("pca.ckpt")), "pca.ckpt"));
  return prepare_task(std::move(task), std::move(pca));
}

inline std::shared_ptr<const encoder::EncoderModel> load_encoder_artifact(const ArtifactStore& store,
                                                                          const std::string& name,
                                                                          const std::string& hash) {
  store.require_fresh(name, hash, "train");
  return std::make_shared<encoder::EncoderModel>(io::load_encoder(store.file(name)));
}

/// Trained models the configured methods need, loaded from disk.
inline Artifacts load_artifacts(const PipelineConfig& pc, const ArtifactStore& store, const ArtifactKeys& k) {
  const ExperimentConfig& c = pc.experiment;
  Artifacts a;
  if (c.uses("gaga-out")) a.gaga_out = load_encoder_artifact(store, "encoder-gaga-out.ckpt", k.enc_out);
  if (c.uses("gaga-phate")) a.gaga_phate = load_encoder_artifact(store, "encoder-gaga-phate.ckpt", k.enc_phate);
  if (c.uses("gaga-out", "bridge")) {
    store.require_fresh("bridge-gaga-out.ckpt", k.bridge_out, "train");
    a.gaga_out_bridge = std::make_shared<solver::BridgeModel>(io::load_bridge(store.file("bridge-gaga-out.ckpt"), a.gaga_out));
  }
  if (c.uses("gaga-phate", "bridge")) {
    store.require_fresh("bridge-gaga-phate.ckpt", k.bridge_phate, "train");
    a.gaga_phate_bridge =
        std::make_shared<solver::BridgeModel>(io::load_bridge(store.file("bridge-gaga-phate.ckpt"), a.gaga_phate));
  }
  return a;
}

inline io::Meta curve_meta(const encoder::TrainResult& r) {
  return {{"best_epoch", std::to_string(r.curves.best_epoch)},
          {"epochs", std::to_string(r.curves.val_loss.size())},
          {"early_stopped", r.curves.early_stopped ? "true" : "false"},
          {"criterion", r.curves.criterion},
          {"best_val_loss", fmt(r.curves.val_loss.empty() ? 0.0 : r.curves.val_loss[static_cast<std::size_t>(r.curves.best_epoch)])}};
}

}  // namespace detail

/// Corpus and behavior head.
inline void stage_gen(const PipelineConfig& pc, const RunOptions& o) {
  const ArtifactStore store(o.out);
  const ArtifactKeys k = artifact_keys(pc);
  const detail::StageLog log(o, "gen");
  if (store.fresh("corpus.gact", k.corpus) && store.fresh("head.ckpt", k.corpus)) {
    log.cached("corpus.gact, head.ckpt");
    return;
  }
  const synth::SyntheticTask t = synth::generate_corpus(pc.experiment.task);
  const io::Meta meta{{"seed", std::to_string(t.spec.seed)}, {"source", "synthetic:" + t.spec.name}};
  io::save_corpus(store.file("corpus.gact"), t.corpus);
  store.stamp("corpus.gact", k.corpus, "gen", meta);
  io::save_bytes(store.file("head.ckpt"), io::encode_head(t.head));
  store.stamp("head.ckpt", k.corpus, "gen", meta);
  log.detail(std::to_string(t.corpus.size()) + " points, D = " + std::to_string(t.corpus.dim()) + ", " +
             std::to_string(t.corpus.classes) + " classes");
  log.wrote("corpus.gact, head.ckpt");
}

/// Principal subspace and the supervision distances the encoders need.
inline void stage_dist(const PipelineConfig& pc, const RunOptions& o) {
  const ArtifactStore store(o.out);
  const ArtifactKeys k = artifact_keys(pc);
  const ExperimentConfig& c = pc.experiment;
  store.require_fresh("corpus.gact", k.corpus, "gen");
  store.require_fresh("head.ckpt", k.corpus, "gen");
  const detail::StageLog log(o, "dist");
  const synth::ActivationCorpus corpus = io::load_corpus(store.file("corpus.gact"));
  if (store.fresh("pca.ckpt", k.pca)) {
    log.cached("pca.ckpt");
  } else {
    io::save_bytes(store.file("pca.ckpt"), io::encode_pca(geom::fit_pca(corpus.points, c.pca_rank)));
    store.stamp("pca.ckpt", k.pca, "dist", {{"source", "pca"}});
    log.wrote("pca.ckpt");
  }
  if (c.uses("gaga-out")) {
    if (store.fresh("dist-output-hellinger.gdmx", k.dist_out)) {
      log.cached("dist-output-hellinger.gdmx");
    } else {
      const auto head = io::decode_head(io::decode_checkpoint(io::load_bytes(store.file("head.ckpt")), "head.ckpt"));
      io::save_distance_matrix(store.file("dist-output-hellinger.gdmx"), geom::output_hellinger_matrix(corpus.points, head));
      store.stamp("dist-output-hellinger.gdmx", k.dist_out, "dist", {{"source", "output-hellinger"}});
      log.wrote("dist-output-hellinger.gdmx");
    }
  }
  if (c.uses("gaga-phate")) {
    if (store.fresh("dist-phate.gdmx", k.dist_phate)) {
      log.cached("dist-phate.gdmx");
    } else {
      const PreparedTask p = detail::load_prepared(pc, store, k);
      io::save_distance_matrix(store.file("dist-phate.gdmx"), gaga_phate_distances(p, c.phate));
      store.stamp("dist-phate.gdmx", k.dist_phate, "dist", {{"source", "phate"}});
      log.wrote("dist-phate.gdmx");
    }
  }
}

/// Encoders and bridges for the configured methods.
inline void stage_train(const PipelineConfig& pc, const RunOptions& o) {
  const ArtifactStore store(o.out);
  const ArtifactKeys k = artifact_keys(pc);
  const ExperimentConfig& c = pc.experiment;
  const PreparedTask p = detail::load_prepared(pc, store, k);
  const detail::StageLog log(o, "train");
  auto encoder_meta = [&](const encoder::TrainConfig& cfg, const encoder::TrainResult& r) {
    io::Meta m = detail::curve_meta(r);
    m["seed"] = std::to_string(cfg.seed);
    m["source"] = encoder::to_string(cfg.supervision);
    return m;
  };
  std::shared_ptr<const encoder::EncoderModel> out_model, phate_model;
  if (c.uses("gaga-out")) {
    if (store.fresh("encoder-gaga-out.ckpt", k.enc_out)) {
      log.cached("encoder-gaga-out.ckpt");
    } else {
      store.require_fresh("dist-output-hellinger.gdmx", k.dist_out, "dist");
      const auto d = io::load_distance_matrix(store.file("dist-output-hellinger.gdmx"));
      const auto cfg = c.gaga_out_config();
      const auto r = train_gaga_out(p, d, cfg);
      io::save_encoder(store.file("encoder-gaga-out.ckpt"), r.model, {{"config", to_json(pc)["gaga_out"].dump()}});
      store.stamp("encoder-gaga-out.ckpt", k.enc_out, "train", encoder_meta(cfg, r));
      log.detail("gaga-out best epoch " + std::to_string(r.curves.best_epoch));
      log.wrote("encoder-gaga-out.ckpt");
    }
  }
  if (c.uses("gaga-phate")) {
    if (store.fresh("encoder-gaga-phate.ckpt", k.enc_phate)) {
      log.cached("encoder-gaga-phate.ckpt");
    } else {
      store.require_fresh("dist-phate.gdmx", k.dist_phate, "dist");
      const auto d = io::load_distance_matrix(store.file("dist-phate.gdmx"));
      const auto r = train_pca_encoder(p, d, c.gaga_phate);
      io::save_encoder(store.file("encoder-gaga-phate.ckpt"), r.model, {{"config", to_json(pc)["gaga_phate"].dump()}});
      store.stamp("encoder-gaga-phate.ckpt", k.enc_phate, "train", encoder_meta(c.gaga_phate, r));
      log.detail("gaga-phate best epoch " + std::to_string(r.curves.best_epoch));
      log.wrote("encoder-gaga-phate.ckpt");
    }
  }
  for (const std::string variant : {"gaga-out", "gaga-phate"}) {
    if (!c.uses(variant, "bridge")) continue;
    const std::string name = "bridge-" + variant + ".ckpt";
    const std::string& hash = variant == "gaga-out" ? k.bridge_out : k.bridge_phate;
    if (store.fresh(name, hash)) {
      log.cached(name);
      continue;
    }
    const auto enc = detail::load_encoder_artifact(store, "encoder-" + variant + ".ckpt",
                                                   variant == "gaga-out" ? k.enc_out : k.enc_phate);
    const Matrix& pts = variant == "gaga-out" ? p.task.corpus.points : p.projected;
    const auto b = solver::train_bridge(rows_from(pts, p.task.corpus.train), enc, c.bridge);
    io::save_bridge(store.file(name), b, {{"config", to_json(pc)["bridge"].dump()}});
    store.stamp(name, hash, "train", {{"seed", std::to_string(c.bridge.seed)}, {"source", variant}});
    log.wrote(name);
  }
}

/// One path file per method, paths in pair order.
inline void stage_solve(const PipelineConfig& pc, const RunOptions& o) {
  const ArtifactStore store(o.out);
  const ArtifactKeys k = artifact_keys(pc);
  const ExperimentConfig& c = pc.experiment;
  const detail::StageLog log(o, "solve");
  std::vector<MethodChoice> todo;
  for (const auto& m : c.methods) {
    if (store.fresh(path_artifact(m), k.paths.at(path_artifact(m)))) log.cached(path_artifact(m));
    else todo.push_back(m);
  }
  if (todo.empty()) return;
  const PreparedTask p = detail::load_prepared(pc, store, k);
  const Artifacts a = detail::load_artifacts(pc, store, k);
  const auto pairs = eval::select_pairs(p.task.corpus.classes, c.suite);
  for (const auto& m : todo) {
    const eval::SteeringMethod method = make_method(m, p, a, c);
    std::vector<solver::GeodesicPath> paths(pairs.size());
    eval::parallel_for(pairs.size(), o.jobs, [&](std::size_t i) { paths[i] = method.solve(pairs[i].first, pairs[i].second); });
    io::Meta meta{{"method", m.method}, {"solver", m.solver}, {"source", m.method}};
    std::string pair_list;
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      pair_list += (i ? "," : "") + std::to_string(pairs[i].first) + "-" + std::to_string(pairs[i].second);
      flagged += paths[i].flagged ? 1 : 0;
      if (!paths[i].note.empty()) meta["note." + std::to_string(i)] = paths[i].note;
      if (!paths[i].solver.empty()) meta["solver_tag"] = paths[i].solver;
    }
    meta["pairs"] = pair_list;
    meta["flagged"] = std::to_string(flagged);
    const std::string name = path_artifact(m);
    io::save_paths(store.file(name), paths);
    store.stamp(name, k.paths.at(name), "solve", meta);
    log.wrote(name + " (" + std::to_string(pairs.size()) + " pairs, " + std::to_string(flagged) + " flagged)");
  }
}

inline const char* kReportHeader =
    "task,method,solver,pair_from,pair_to,e_bc,arc_len,legibility,target_prob_end,top1_end,visit_rate\n";
inline const char* kSummaryHeader =
    "task,method,solver,pairs,flagged,e_bc,arc_len,legibility,target_prob_end,top1_end,visit_rate,baseline,t,p\n";

inline std::string report_csv(const eval::SteeringReport& r) {
  std::string s = kReportHeader;
  for (const auto& row : r.rows)
    s += detail::csv_field(row.task) + "," + row.method + "," + row.solver + "," + std::to_string(row.from) + "," +
         std::to_string(row.to) + "," + detail::fmt(row.e_bc) + "," + detail::fmt(row.arc_len) + "," +
         detail::fmt(row.legibility) + "," + detail::fmt(row.target_prob_end) + "," + detail::fmt(row.top1_end) + "," +
         detail::fmt(row.visit_rate) + "\n";
  return s;
}

inline std::string summary_csv(const eval::SteeringReport& r) {
  std::string s = kSummaryHeader;
  for (const auto& m : r.summaries)
    s += detail::csv_field(r.task) + "," + m.method + "," + m.solver + "," + std::to_string(m.pairs) + "," +
         std::to_string(m.flagged) + "," + detail::fmt(m.e_bc) + "," + detail::fmt(m.arc_len) + "," +
         detail::fmt(m.legibility) + "," + detail::fmt(m.target_prob_end) + "," + detail::fmt(m.top1_end) + "," +
         detail::fmt(m.visit_rate) + "," + m.baseline + "," + (m.vs_baseline ? detail::fmt(m.vs_baseline->t) : "") +
         "," + (m.vs_baseline ? detail::fmt(m.vs_baseline->p) : "") + "\n";
  return s;
}

/// Evaluates the solved paths; returns the in-memory report as well.
inline eval::SteeringReport stage_eval(const PipelineConfig& pc, const RunOptions& o) {
  const ArtifactStore store(o.out);
  const ArtifactKeys k = artifact_keys(pc);
  const ExperimentConfig& c = pc.experiment;
  const detail::StageLog log(o, "eval");
  const PreparedTask p = detail::load_prepared(pc, store, k);
  const auto pairs = eval::select_pairs(p.task.corpus.classes, c.suite);
  std::vector<eval::SteeringMethod> methods;
  for (const auto& m : c.methods) {
    const std::string name = path_artifact(m);
    store.require_fresh(name, k.paths.at(name), "solve");
    auto paths = std::make_shared<std::vector<solver::GeodesicPath>>(io::load_paths(store.file(name)));
    const io::Meta meta = io::load_meta(store.file(name) + ".meta");
    if (paths->size() != pairs.size()) throw StageError(name + ": path count does not match the pair selection");
    for (std::size_t i = 0; i < paths->size(); ++i)
      if (const auto it = meta.find("note." + std::to_string(i)); it != meta.end()) (*paths)[i].note = it->second;
    auto index = std::make_shared<std::map<std::pair<Index, Index>, std::size_t>>();
    for (std::size_t i = 0; i < pairs.size(); ++i) (*index)[pairs[i]] = i;
    methods.push_back({m.method, m.solver, m.method != "gaga-out",
                       [paths, index](Index a, Index b) { return (*paths)[index->at({a, b})]; }});
  }
  eval::SuiteOptions so = c.suite;
  so.jobs = o.jobs;
  eval::SteeringReport r = eval::evaluate_suite(c.task.name, p.task.corpus, p.task.head, p.pca, methods, so);
  detail::write_text(store.file("report.csv"), report_csv(r));
  store.stamp("report.csv", k.report, "eval", {{"source", "evaluate"}, {"seed", std::to_string(c.suite.seed)}});
  detail::write_text(store.file("summary.csv"), summary_csv(r));
  store.stamp("summary.csv", k.report, "eval", {{"source", "evaluate"}, {"seed", std::to_string(c.suite.seed)}});
  log.wrote("report.csv, summary.csv");
  return r;
}

/// Plain-text table of the method summaries.
inline std::string stage_report(const PipelineConfig& pc, const RunOptions& o) {
  const ArtifactStore store(o.out);
  const ArtifactKeys k = artifact_keys(pc);
  store.require_fresh("summary.csv", k.report, "eval");
  std::ifstream in(store.file("summary.csv"));
  std::string line;
  std::getline(in, line);
  if (line + "\n" != kSummaryHeader) throw StageError("summary.csv: unexpected header");
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-11s %-11s %5s %7s %10s %8s %6s %9s %6s %6s %9s %10s\n", "method", "solver", "pairs",
                "flagged", "e_bc", "arc_len", "legib", "tgt_prob", "top1", "visit", "t", "p");
  std::string text = "task " + pc.experiment.task.name + "\n" + buf;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t comma; (comma = line.find(',', start)) != std::string::npos; start = comma + 1)
      f.push_back(line.substr(start, comma - start));
    f.push_back(line.substr(start));
    if (f.size() != 14) throw StageError("summary.csv: malformed row '" + line + "'");
    auto num = [&](std::size_t i) { return f[i].empty() ? 0.0 : std::stod(f[i]); };
    std::snprintf(buf, sizeof buf, "%-11s %-11s %5s %7s %10.5f %8.4f %6.3f %9.4f %6.3f %6.3f %9s %10s\n", f[1].c_str(),
                  f[2].c_str(), f[3].c_str(), f[4].c_str(), num(5), num(6), num(7), num(8), num(9), num(10),
                  f[12].empty() ? "-" : detail::fmt(num(12)).c_str(), f[13].empty() ? "-" : f[13].c_str());
    text += buf;
  }
  detail::write_text(store.file("report.txt"), text);
  store.stamp("report.txt", k.report, "report");
  return text;
}

/// gen -> dist -> train -> solve -> eval -> report; cached stages are skipped.
inline std::string run_pipeline(const PipelineConfig& pc, const RunOptions& o) {
  pc.experiment.validate();
  stage_gen(pc, o);
  stage_dist(pc, o);
  stage_train(pc, o);
  stage_solve(pc, o);
  const ArtifactStore store(o.out);
  const ArtifactKeys k = artifact_keys(pc);
  if (store.fresh("report.csv", k.report) && store.fresh("summary.csv", k.report))
    detail::StageLog(o, "eval").cached("report.csv, summary.csv");
  else
    stage_eval(pc, o);
  return stage_report(pc, o);
}

// ---- encoder-variant sweep ----

inline const char* kSweepHeader = "encoder,pb_demap_r,e_bc,t_vs_linear,legibility,target_prob_end,top1_end,status\n";

struct SweepCell {
  std::string name;
  encoder::TrainConfig train;
};

inline std::vector<SweepCell> sweep_cells(const PipelineConfig& pc) {
  std::vector<SweepCell> cells;
  const SweepConfig& s = pc.sweep;
  for (const auto& sup : s.supervisions)
    for (double lambda : s.lambdas) {
      encoder::TrainConfig t = encoder::TrainConfig::gaga_phate();
      t.supervision = encoder::supervision_from_string(sup);
      t.lambda_dist = lambda;
      t.latent_dim = s.latent_dim;
      t.max_epochs = s.max_epochs;
      cells.push_back({(sup == "phate" ? "gaga-phate" : "gaga-hellinger") + std::string("-lambda-") + detail::fmt(lambda), t});
    }
  if (s.vanilla) {
    encoder::TrainConfig t = encoder::TrainConfig::vanilla(s.latent_dim);
    t.max_epochs = s.max_epochs;
    cells.push_back({"vanilla", t});
  }
  return cells;
}

/// Trains and evaluates every sweep cell on principal coordinates. A failing
/// cell is reported with its error and does not stop the sweep.
inline std::string stage_sweep(const PipelineConfig& pc, const RunOptions& o) {
  const ArtifactStore store(o.out);
  const ArtifactKeys k = artifact_keys(pc);
  const ExperimentConfig& c = pc.experiment;
  const detail::StageLog log(o, "sweep");
  if (store.fresh("sweep.csv", k.sweep)) {
    log.cached("sweep.csv");
    std::ifstream in(store.file("sweep.csv"));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  const PreparedTask p = detail::load_prepared(pc, store, k);
  const auto& corpus = p.task.corpus;
  const geom::DistanceMatrix phate = gaga_phate_distances(p, c.phate);
  const geom::DistanceMatrix hellinger = gaga_out_distances(p);
  eval::SuiteOptions so = c.suite;
  so.jobs = o.jobs;

  ExperimentConfig base = c;
  const eval::SteeringMethod linear = make_method({"linear", "closed-form"}, p, {}, base);
  std::string csv = kSweepHeader;
  std::optional<eval::SteeringReport> reference;
  for (const auto& cell : sweep_cells(pc)) {
    try {
      const geom::DistanceMatrix& target =
          cell.train.supervision == encoder::Supervision::output_hellinger ? hellinger : phate;
      std::optional<geom::DistanceMatrix> sup;
      if (cell.train.lambda_dist > 0.0) sup = target;
      const auto r = train_pca_encoder(p, sup, cell.train);
      const Matrix val = rows_from(p.projected, corpus.val);
      const double demap_r = encoder::distance_matching_accuracy(r.model, val, target.slice(corpus.val)).correlation;
      Artifacts a;
      a.gaga_phate = std::make_shared<encoder::EncoderModel>(r.model);
      eval::SteeringMethod m = make_method({"gaga-phate", "lbfgs"}, p, a, base);
      m.name = cell.name;
      const auto rep = eval::evaluate_suite(c.task.name, corpus, p.task.head, p.pca, {linear, m}, so);
      if (!reference) reference = rep;
      const auto& s = rep.summaries[1];
      std::string status = s.flagged ? "flagged:" + std::to_string(s.flagged) : "ok";
      if (!s.test_note.empty()) status += " (" + s.test_note + ")";
      csv += cell.name + "," + detail::fmt(demap_r) + "," + detail::fmt(s.e_bc) + "," +
             (s.vs_baseline ? detail::fmt(s.vs_baseline->t) : "") + "," + detail::fmt(s.legibility) + "," +
             detail::fmt(s.target_prob_end) + "," + detail::fmt(s.top1_end) + "," + detail::csv_field(status) + "\n";
      log.detail(cell.name + " e_bc " + detail::fmt(s.e_bc));
    } catch (const std::exception& e) {
      csv += cell.name + ",,,,,,," + detail::csv_field(std::string("failed: ") + e.what()) + "\n";
      log.detail(cell.name + " failed: " + e.what());
    }
  }
  if (reference) {
    const auto& s = reference->summaries[0];
    csv += "linear," + std::string(",") + detail::fmt(s.e_bc) + ",," + detail::fmt(s.legibility) + "," +
           detail::fmt(s.target_prob_end) + "," + detail::fmt(s.top1_end) + ",reference\n";
  }
  detail::write_text(store.file("sweep.csv"), csv);
  store.stamp("sweep.csv", k.sweep, "sweep", {{"cells", std::to_string(sweep_cells(pc).size())}});
  log.wrote("sweep.csv");
  return csv;
}

}  // namespace geosteer::pipeline
