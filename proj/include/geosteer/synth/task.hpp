#pragma once

#include "geosteer/synth/corpus.hpp"
#include "geosteer/synth/head.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

namespace geosteer::synth {

struct TaskSpec {
  std::string name = "custom";
  Topology topology = Topology::cyclic;
  std::size_t classes = 7;
  std::size_t ambient_dim = 64;
  std::size_t paraphrases = 21;
  std::size_t facts = 49;  // total facts; fact f belongs to class f mod classes
  double offset_norm = 0.1;
  double noise_sigma = 0.02;
  // Facts of one class sit at evenly stratified angles covering this fraction
  // of the class's share of the curve. 1 tiles the curve uniformly; 0 puts
  // every fact on its class anchor.
  double fact_spread = 1.0;
  std::uint64_t seed = 42;
  double val_fraction = 0.2;
  std::uint64_t split_seed = 42;
  double head_temperature = 0.5;
  double other_logit = -4.0;

  std::size_t corpus_size() const { return facts * paraphrases; }

  void validate() const {
    require(classes >= 2, "TaskSpec: need at least two classes");
    require(ambient_dim >= 3, "TaskSpec: ambient dimension must be at least 3");
    require(paraphrases >= 1, "TaskSpec: need at least one paraphrase");
    require(facts >= classes, "TaskSpec: " + std::to_string(classes) + " classes exceed the capacity of " +
                                  std::to_string(facts) + " facts");
    require(offset_norm >= 0.0 && noise_sigma >= 0.0, "TaskSpec: negative offset or noise scale");
    require(fact_spread >= 0.0 && fact_spread <= 1.0, "TaskSpec: fact spread outside [0, 1]");
    require(val_fraction > 0.0 && val_fraction < 1.0, "TaskSpec: validation fraction outside (0, 1)");
    require(head_temperature > 0.0, "TaskSpec: head temperature must be positive");
  }
};

/// Named presets: weekdays-7, months-12, letters-22, ages-91.
inline TaskSpec preset(const std::string& name) {
  TaskSpec s;
  s.name = name;
  if (name == "weekdays-7") {
    s.topology = Topology::cyclic, s.classes = 7, s.facts = 49, s.paraphrases = 21;
  } else if (name == "months-12") {
    s.topology = Topology::cyclic, s.classes = 12, s.facts = 55, s.paraphrases = 20;
  } else if (name == "letters-22") {
    s.topology = Topology::sequential, s.classes = 22, s.facts = 55, s.paraphrases = 20;
  } else if (name == "ages-91") {
    s.topology = Topology::sequential, s.classes = 91, s.facts = 100, s.paraphrases = 11;
  } else {
    throw ContractViolation("unknown task preset '" + name + "'");
  }
  return s;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"weekdays-7", "months-12", "letters-22", "ages-91"};
  return names;
}

/// The noise-free class curve: a unit circle (cyclic) or a 270 degree arc
/// (sequential) in a 2-plane of the ambient space, centred at the origin.
struct ManifoldDescriptor {
  Topology topology = Topology::cyclic;
  Matrix basis;    // 2 x D, orthonormal rows
  Vector angles;   // class angle, radians
  Matrix anchors;  // K x D
  double radius = 1.0;

  Vector point(double angle) const {
    return radius * (std::cos(angle) * basis.row(0) + std::sin(angle) * basis.row(1)).transpose();
  }

  /// Euclidean distance from h to the full circle carrying the classes.
  double distance_to_circle(const Vector& h) const {
    const Vector in_plane = basis * h;
    const double off2 = (h - basis.transpose() * in_plane).squaredNorm();
    const double radial = in_plane.norm() - radius;
    return std::sqrt(off2 + radial * radial);
  }
};

struct SyntheticTask {
  TaskSpec spec;
  ActivationCorpus corpus;
  BehaviorHead head;
  ManifoldDescriptor truth;
};

inline double class_spacing(const TaskSpec& spec) {
  const double k = static_cast<double>(spec.classes);
  return spec.topology == Topology::cyclic ? 2.0 * std::numbers::pi / k : 1.5 * std::numbers::pi / (k - 1.0);
}

inline double class_angle(const TaskSpec& spec, std::size_t c) { return class_spacing(spec) * static_cast<double>(c); }

/// Angle of fact f: its class angle plus a stratified offset within the class.
inline double fact_angle(const TaskSpec& spec, std::size_t f) {
  const std::size_t k = spec.classes, c = f % k, j = f / k;
  const std::size_t in_class = spec.facts / k + (c < spec.facts % k ? 1 : 0);
  const double u = (2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(in_class)) - 1.0;  // in (-1, 1)
  return class_angle(spec, c) + u * spec.fact_spread * 0.5 * class_spacing(spec);
}

namespace detail {

inline Vector gaussian_vector(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(static_cast<Index>(d));
  for (Index i = 0; i < v.size(); ++i) v[i] = n(rng);
  return v;
}

}  // namespace detail

/// Deterministic random split; both index lists come back sorted.
inline void split_indices(std::size_t n, double val_fraction, std::uint64_t seed, std::vector<std::size_t>& train,
                          std::vector<std::size_t>& val) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
}

inline SyntheticTask generate_corpus(const TaskSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t d = spec.ambient_dim;

  // Orthonormal 2-plane by Gram-Schmidt on two Gaussian draws.
  Matrix basis(2, static_cast<Index>(d));
  Vector e0 = detail::gaussian_vector(rng, d);
  e0.normalize();
  Vector e1 = detail::gaussian_vector(rng, d);
  e1 -= e1.dot(e0) * e0;
  e1.normalize();
  basis.row(0) = e0.transpose();
  basis.row(1) = e1.transpose();

  ManifoldDescriptor truth;
  truth.topology = spec.topology;
  truth.basis = basis;
  truth.angles.resize(static_cast<Index>(spec.classes));
  truth.anchors.resize(static_cast<Index>(spec.classes), static_cast<Index>(d));
  for (std::size_t c = 0; c < spec.classes; ++c) {
    truth.angles[static_cast<Index>(c)] = class_angle(spec, c);
    truth.anchors.row(static_cast<Index>(c)) = truth.point(class_angle(spec, c)).transpose();
  }

  // Paraphrase offsets live in the orthogonal complement of the class plane.
  Matrix offsets(static_cast<Index>(spec.paraphrases), static_cast<Index>(d));
  for (std::size_t p = 0; p < spec.paraphrases; ++p) {
    Vector v = detail::gaussian_vector(rng, d);
    v -= basis.transpose() * (basis * v);
    const double norm = v.norm();
    offsets.row(static_cast<Index>(p)) = (norm > 0.0 ? Vector(v * (spec.offset_norm / norm)) : Vector(v * 0.0)).transpose();
  }

  ActivationCorpus corpus;
  corpus.classes = spec.classes;
  corpus.topology = spec.topology;
  const std::size_t n = spec.corpus_size();
  corpus.points.resize(static_cast<Index>(n), static_cast<Index>(d));
  corpus.labels.resize(n);
  corpus.paraphrase.resize(n);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t i = 0;
  for (std::size_t f = 0; f < spec.facts; ++f) {
    const std::size_t c = f % spec.classes;
    const RowVector base = truth.point(fact_angle(spec, f)).transpose();
    for (std::size_t p = 0; p < spec.paraphrases; ++p, ++i) {
      auto row = corpus.points.row(static_cast<Index>(i));
      row = base + offsets.row(static_cast<Index>(p));
      if (spec.noise_sigma > 0.0)
        for (Index j = 0; j < row.size(); ++j) row[j] += spec.noise_sigma * noise(rng);
      corpus.labels[i] = c;
      corpus.paraphrase[i] = p;
    }
  }
  split_indices(n, spec.val_fraction, spec.split_seed, corpus.train, corpus.val);
  corpus.validate();

  BehaviorHead head(truth.anchors, spec.head_temperature, spec.other_logit);
  return {spec, std::move(corpus), std::move(head), std::move(truth)};
}

}  // namespace geosteer::synth
