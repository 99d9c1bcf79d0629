#pragma once

#include "geosteer/diffcore/matrix.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace geosteer::synth {

enum class Topology { cyclic, sequential };

inline std::string to_string(Topology t) { return t == Topology::cyclic ? "cyclic" : "sequential"; }

inline Topology topology_from_string(const std::string& s) {
  if (s == "cyclic") return Topology::cyclic;
  if (s == "sequential") return Topology::sequential;
  throw ContractViolation("unknown topology '" + s + "'");
}

/// Points in ambient space with evaluation-only labels and a train/val split.
struct ActivationCorpus {
  Matrix points;                      // n x D
  std::vector<std::size_t> labels;    // class per point, evaluation only
  std::vector<std::size_t> paraphrase;
  std::vector<std::size_t> train;     // ascending
  std::vector<std::size_t> val;       // ascending
  std::size_t classes = 0;
  Topology topology = Topology::cyclic;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }

  void validate() const {
    const std::size_t n = size();
    require(labels.size() == n && paraphrase.size() == n, "corpus: metadata length differs from point count");
    require(points.allFinite(), "corpus: non-finite point");
    std::vector<char> seen(n, 0);
    for (auto set : {&train, &val})
      for (auto i : *set) {
        require(i < n, "corpus: split index out of range");
        require(!seen[i], "corpus: split sets overlap or repeat index " + std::to_string(i));
        seen[i] = 1;
      }
    for (std::size_t i = 0; i < n; ++i) require(seen[i], "corpus: index " + std::to_string(i) + " not in any split");
    for (auto l : labels) require(l < classes, "corpus: label out of range");
  }
};

/// Label-free view handed to training code. It exposes points and the split
/// only, so training entry points cannot read class labels.
class UnlabeledView {
public:
  explicit UnlabeledView(const ActivationCorpus& c) : points_(&c.points), train_(&c.train), val_(&c.val) {}
  UnlabeledView(const Matrix& points, const std::vector<std::size_t>& train, const std::vector<std::size_t>& val)
      : points_(&points), train_(&train), val_(&val) {}

  const Matrix& points() const { return *points_; }
  const std::vector<std::size_t>& train() const { return *train_; }
  const std::vector<std::size_t>& val() const { return *val_; }
  std::size_t size() const { return static_cast<std::size_t>(points_->rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points_->cols()); }

private:
  const Matrix* points_;
  const std::vector<std::size_t>* train_;
  const std::vector<std::size_t>* val_;
};

/// Per-class mean of the corpus points.
inline Matrix class_centroids(const ActivationCorpus& corpus) {
  Matrix sums = Matrix::Zero(static_cast<Index>(corpus.classes), corpus.points.cols());
  std::vector<std::size_t> counts(corpus.classes, 0);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    sums.row(static_cast<Index>(corpus.labels[i])) += corpus.points.row(static_cast<Index>(i));
    ++counts[corpus.labels[i]];
  }
  for (std::size_t c = 0; c < corpus.classes; ++c) {
    require(counts[c] > 0, "class_centroids: class " + std::to_string(c) + " has no points");
    sums.row(static_cast<Index>(c)) /= static_cast<double>(counts[c]);
  }
  return sums;
}

}  // namespace geosteer::synth
