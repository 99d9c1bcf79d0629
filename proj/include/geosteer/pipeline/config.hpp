#pragma once

#include "geosteer/pipeline/experiment.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace geosteer::pipeline {

using Json = nlohmann::json;

/// Malformed, unknown or inconsistent configuration.
class ConfigError : public ContractViolation {
public:
  using ContractViolation::ContractViolation;
};

/// Settings of the encoder-variant sweep: supervisions x distance weights,
/// plus one reconstruction-only cell.
struct SweepConfig {
  std::vector<std::string> supervisions{"phate", "output-hellinger"};
  std::vector<double> lambdas{0.1, 1, 10, 50, 100, 250, 500};
  bool vanilla = true;
  Index latent_dim = 2;
  int max_epochs = 300;

  std::size_t cells() const { return supervisions.size() * lambdas.size() + (vanilla ? 1 : 0); }
};

struct PipelineConfig {
  ExperimentConfig experiment;
  SweepConfig sweep;
};

namespace detail {

/// Reads members from a JSON object; every key must be consumed.
class JsonReader {
public:
  JsonReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void operator()(const char* key, T& out) {
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    read(*it, out, where_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

  template <typename T>
  static void read(const Json& v, T& out, const std::string& where) {
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
        if (std::is_unsigned_v<T> && v.get<long long>() < 0) throw ConfigError(where + ": must be non-negative");
        out = v.get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(where + ": expected a number");
        out = v.get<T>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where + ": expected a string");
        out = v.get<std::string>();
      } else if constexpr (std::is_same_v<T, std::optional<int>>) {
        if (v.is_null()) out.reset();
        else {
          int x = 0;
          read(v, x, where);
          out = x;
        }
      } else if constexpr (std::is_same_v<T, synth::Topology>) {
        std::string s;
        read(v, s, where);
        if (s != "cyclic" && s != "sequential") throw ConfigError(where + ": topology must be cyclic or sequential");
        out = s == "cyclic" ? synth::Topology::cyclic : synth::Topology::sequential;
      } else if constexpr (std::is_same_v<T, encoder::Supervision>) {
        std::string s;
        read(v, s, where);
        try {
          out = encoder::supervision_from_string(s);
        } catch (const ContractViolation& e) {
          throw ConfigError(where + ": " + e.what());
        }
      } else {
        if (!v.is_array()) throw ConfigError(where + ": expected an array");
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
          typename T::value_type x{};
          read(v[i], x, where + "[" + std::to_string(i) + "]");
          out.push_back(x);
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

/// Writes members into a JSON object.
class JsonWriter {
public:
  template <typename T>
  void operator()(const char* key, const T& v) {
    if constexpr (std::is_same_v<T, std::optional<int>>) {
      j[key] = v ? Json(*v) : Json(nullptr);
    } else if constexpr (std::is_same_v<T, synth::Topology>) {
      j[key] = synth::to_string(v);
    } else if constexpr (std::is_same_v<T, encoder::Supervision>) {
      j[key] = encoder::to_string(v);
    } else {
      j[key] = v;
    }
  }
  Json j = Json::object();
};

template <typename V, typename S>
void visit_task(V& v, S& s) {
  v("name", s.name), v("topology", s.topology), v("classes", s.classes), v("ambient_dim", s.ambient_dim);
  v("paraphrases", s.paraphrases), v("facts", s.facts), v("offset_norm", s.offset_norm);
  v("noise_sigma", s.noise_sigma), v("fact_spread", s.fact_spread), v("seed", s.seed);
  v("val_fraction", s.val_fraction), v("split_seed", s.split_seed), v("head_temperature", s.head_temperature);
  v("other_logit", s.other_logit);
}

template <typename V, typename C>
void visit_train(V& v, C& c) {
  v("supervision", c.supervision), v("latent_dim", c.latent_dim), v("lambda_dist", c.lambda_dist);
  v("lambda_recon", c.lambda_recon), v("lambda_cycle", c.lambda_cycle), v("lambda_pw", c.lambda_pw);
  v("alpha", c.alpha), v("zeta", c.zeta), v("batch", c.batch), v("lr", c.lr), v("weight_decay", c.weight_decay);
  v("warmup_fraction", c.warmup_fraction), v("max_epochs", c.max_epochs), v("patience", c.patience);
  v("seed", c.seed), v("hidden", c.hidden);
}

template <typename V, typename O>
void visit_phate(V& v, O& o) {
  v("knn", o.knn), v("t", o.t), v("max_t", o.max_t), v("bandwidth_floor", o.bandwidth_floor);
  v("potential_floor", o.potential_floor), v("max_points", o.max_points);
}

template <typename V, typename O>
void visit_lbfgs(V& v, O& o) {
  v("lr", o.lbfgs.lr), v("max_iter", o.lbfgs.max_iter), v("max_eval", o.lbfgs.max_eval);
  v("tolerance_grad", o.lbfgs.tolerance_grad), v("tolerance_change", o.lbfgs.tolerance_change);
  v("history_size", o.lbfgs.history_size), v("clip_sup_norm", o.lbfgs.clip_sup_norm), v("c1", o.lbfgs.c1);
  v("c2", o.lbfgs.c2), v("max_line_search", o.lbfgs.max_line_search), v("backtracks", o.backtracks);
}

template <typename V, typename B>
void visit_bridge(V& v, B& b) {
  v("width", b.width), v("layers", b.layers), v("envelope_q", b.envelope_q), v("steps", b.steps), v("batch", b.batch);
  v("time_steps", b.time_steps), v("lr", b.lr), v("mu", b.mu), v("epsilon", b.epsilon), v("seed", b.seed);
}

template <typename V, typename S>
void visit_suite(V& v, S& s) {
  v("carriers", s.carriers), v("seed", s.seed), v("all_pairs_up_to", s.all_pairs_up_to);
  v("sampled_pairs", s.sampled_pairs);
}

template <typename V, typename S>
void visit_sweep(V& v, S& s) {
  v("supervisions", s.supervisions), v("lambdas", s.lambdas), v("vanilla", s.vanilla);
  v("latent_dim", s.latent_dim), v("max_epochs", s.max_epochs);
}

template <typename T, typename F>
void read_section(const Json& root, const char* key, T& out, F visit) {
  const auto it = root.find(key);
  if (it == root.end()) return;
  JsonReader r(*it, key);
  visit(r, out);
  r.finish();
}

template <typename T, typename F>
Json write_section(const T& in, F visit) {
  JsonWriter w;
  visit(w, in);
  return w.j;
}

}  // namespace detail

/// Builds a config from JSON. `task` is a preset name or an object with an
/// optional "preset" plus field overrides; `methods` lists names (default
/// solver) or {"method", "solver"} objects.
inline PipelineConfig parse_config(const Json& root) {
  if (!root.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> known{"task",  "methods", "pca_rank", "waypoints", "epsilon", "phate", "gaga_phate",
                                           "gaga_out", "lbfgs", "bridge",  "suite",    "sweep"};
  for (auto it = root.begin(); it != root.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("config: unknown key '" + it.key() + "'");

  PipelineConfig pc;
  ExperimentConfig& c = pc.experiment;
  if (const auto t = root.find("task"); t != root.end()) {
    try {
      if (t->is_string()) {
        c.task = synth::preset(t->get<std::string>());
      } else if (t->is_object()) {
        Json rest = *t;
        if (const auto p = rest.find("preset"); p != rest.end()) {
          if (!p->is_string()) throw ConfigError("task.preset: expected a string");
          c.task = synth::preset(p->get<std::string>());
          rest.erase("preset");
        }
        detail::JsonReader r(rest, "task");
        detail::visit_task(r, c.task);
        r.finish();
      } else {
        throw ConfigError("task: expected a preset name or an object");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("task: ") + e.what());
    }
  }
  if (const auto m = root.find("methods"); m != root.end()) {
    if (!m->is_array() || m->empty()) throw ConfigError("methods: expected a non-empty array");
    c.methods.clear();
    for (std::size_t i = 0; i < m->size(); ++i) {
      const Json& e = (*m)[i];
      const std::string where = "methods[" + std::to_string(i) + "]";
      MethodChoice mc;
      if (e.is_string()) {
        mc.method = e.get<std::string>();
      } else if (e.is_object()) {
        detail::JsonReader r(e, where);
        r("method", mc.method);
        r("solver", mc.solver);
        r.finish();
      } else {
        throw ConfigError(where + ": expected a name or an object");
      }
      const auto& names = method_names();
      if (std::find(names.begin(), names.end(), mc.method) == names.end())
        throw ConfigError(where + ": unknown method '" + mc.method + "'");
      if (mc.solver.empty()) mc.solver = default_solver(mc.method);
      for (const auto& prev : c.methods)
        if (prev.method == mc.method && prev.solver == mc.solver)
          throw ConfigError(where + ": duplicate " + mc.method + "/" + mc.solver);
      c.methods.push_back(mc);
    }
  }
  auto scalar = [&](const char* key, auto& out) {
    if (const auto it = root.find(key); it != root.end()) detail::JsonReader::read(*it, out, key);
  };
  scalar("pca_rank", c.pca_rank);
  scalar("waypoints", c.waypoints);
  scalar("epsilon", c.epsilon);
  detail::read_section(root, "phate", c.phate, [](auto& v, auto& o) { detail::visit_phate(v, o); });
  detail::read_section(root, "gaga_phate", c.gaga_phate, [](auto& v, auto& o) { detail::visit_train(v, o); });
  if (root.contains("gaga_out")) {
    encoder::TrainConfig g = c.gaga_out_config();
    detail::read_section(root, "gaga_out", g, [](auto& v, auto& o) { detail::visit_train(v, o); });
    c.gaga_out = g;
  }
  detail::read_section(root, "lbfgs", c.lbfgs, [](auto& v, auto& o) { detail::visit_lbfgs(v, o); });
  detail::read_section(root, "bridge", c.bridge, [](auto& v, auto& o) { detail::visit_bridge(v, o); });
  detail::read_section(root, "suite", c.suite, [](auto& v, auto& o) { detail::visit_suite(v, o); });
  detail::read_section(root, "sweep", pc.sweep, [](auto& v, auto& o) { detail::visit_sweep(v, o); });

  try {
    c.validate();
    c.gaga_phate.validate();
    c.gaga_out_config().validate();
    c.bridge.validate();
    for (const auto& s : pc.sweep.supervisions) encoder::supervision_from_string(s);
  } catch (const ConfigError&) {
    throw;
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  if (c.gaga_out_config().latent_dim != static_cast<Index>(c.task.classes))
    throw ConfigError("gaga_out.latent_dim must equal the class count (" + std::to_string(c.task.classes) + ")");
  return pc;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return parse_config(Json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Fully resolved config; keys are sorted, so the dump is canonical.
inline Json to_json(const PipelineConfig& pc) {
  const ExperimentConfig& c = pc.experiment;
  Json j;
  j["task"] = detail::write_section(c.task, [](auto& v, auto& o) { detail::visit_task(v, o); });
  j["methods"] = Json::array();
  for (const auto& m : c.methods) j["methods"].push_back({{"method", m.method}, {"solver", m.solver}});
  j["pca_rank"] = c.pca_rank;
  j["waypoints"] = c.waypoints;
  j["epsilon"] = c.epsilon;
  j["phate"] = detail::write_section(c.phate, [](auto& v, auto& o) { detail::visit_phate(v, o); });
  j["gaga_phate"] = detail::write_section(c.gaga_phate, [](auto& v, auto& o) { detail::visit_train(v, o); });
  j["gaga_out"] = detail::write_section(c.gaga_out_config(), [](auto& v, auto& o) { detail::visit_train(v, o); });
  j["lbfgs"] = detail::write_section(c.lbfgs, [](auto& v, auto& o) { detail::visit_lbfgs(v, o); });
  j["bridge"] = detail::write_section(c.bridge, [](auto& v, auto& o) { detail::visit_bridge(v, o); });
  j["suite"] = detail::write_section(c.suite, [](auto& v, auto& o) { detail::visit_suite(v, o); });
  j["sweep"] = detail::write_section(pc.sweep, [](auto& v, auto& o) { detail::visit_sweep(v, o); });
  return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(const Json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

}  // namespace geosteer::pipeline
