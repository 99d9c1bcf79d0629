#pragma once

#include "geosteer/diffcore/adamw.hpp"
#include "geosteer/encoder/losses.hpp"
#include "geosteer/geom/distance_matrix.hpp"
#include "geosteer/synth/corpus.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <random>

namespace geosteer::encoder {

struct TrainConfig {
  Supervision supervision = Supervision::phate;
  Index latent_dim = 2;
  double lambda_dist = 0.9;
  double lambda_recon = 0.1;
  double lambda_cycle = 0.05;
  double lambda_pw = 0.0;
  double alpha = 0.1;  // local-emphasis decay
  double zeta = 0.5;   // pointwise softmax temperature
  std::size_t batch = 256;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double warmup_fraction = 0.05;
  int max_epochs = 300;
  int patience = 30;
  std::uint64_t seed = 42;
  std::vector<Index> hidden;  // empty: hidden_widths(ambient)

  /// PHATE-supervised recipe with a cycle loss.
  static TrainConfig gaga_phate() { return TrainConfig{}; }

  /// Output-Hellinger recipe: k = K latents, pointwise loss, no cycle loss.
  static TrainConfig gaga_out(Index classes) {
    TrainConfig c;
    c.supervision = Supervision::output_hellinger;
    c.latent_dim = classes;
    c.lambda_dist = 50.0;
    c.lambda_recon = 1.0;
    c.lambda_cycle = 0.0;
    c.lambda_pw = 10.0;
    return c;
  }

  /// Reconstruction only.
  static TrainConfig vanilla(Index latent) {
    TrainConfig c;
    c.supervision = Supervision::vanilla;
    c.latent_dim = latent;
    c.lambda_dist = 0.0;
    c.lambda_recon = 1.0;
    c.lambda_cycle = 0.0;
    return c;
  }

  void validate() const {
    require(latent_dim >= 1, "TrainConfig: latent_dim must be positive");
    require(lambda_dist >= 0 && lambda_recon >= 0 && lambda_cycle >= 0 && lambda_pw >= 0,
            "TrainConfig: loss weights must be non-negative");
    require(lambda_dist + lambda_recon + lambda_cycle + lambda_pw > 0, "TrainConfig: all loss weights are zero");
    require(batch >= 2, "TrainConfig: batch must be at least 2");
    require(lr > 0 && max_epochs >= 1 && patience >= 1, "TrainConfig: lr, max_epochs and patience must be positive");
    require(supervision != Supervision::vanilla || lambda_dist == 0.0,
            "TrainConfig: vanilla supervision cannot weight the distance loss");
  }
};

struct TrainingCurves {
  std::vector<double> train_loss;  // mean total loss per epoch
  std::vector<double> val_loss;    // early-stopping criterion per epoch
  std::string criterion;           // "dist" or "recon"
  int best_epoch = 0;
  bool early_stopped = false;
};

struct TrainResult {
  EncoderModel model;
  TrainingCurves curves;
};

namespace detail {

inline bool supervision_matches(Supervision s, geom::DistanceSource src) {
  switch (s) {
    case Supervision::phate: return src == geom::DistanceSource::phate;
    case Supervision::output_hellinger: return src == geom::DistanceSource::output_hellinger;
    case Supervision::vanilla: return true;
  }
  return false;
}

}  // namespace detail

/// Validation criterion: L_dist on val x val when the distance loss is
/// active, otherwise reconstruction loss on the validation points.
inline double validation_loss(const EncoderModel& m, const Matrix& val_points, const Matrix& val_targets,
                              const TrainConfig& cfg) {
  if (cfg.lambda_dist > 0.0) return loss_dist_value(m.encode_rows(val_points), val_targets, cfg.alpha);
  return loss_recon_value(m, val_points);
}

/// Mini-batch training with AdamW and warmup-cosine decay; each batch uses the
/// dense distance sub-matrix of its points. Returns the model from the epoch
/// with the lowest validation loss (earliest on ties).
///
/// `root_targets` holds one pointwise target row per corpus point and is
/// required exactly when lambda_pw > 0.
inline TrainResult train_encoder(const synth::UnlabeledView& data, const std::optional<geom::DistanceMatrix>& distances,
                                 const TrainConfig& cfg, const Matrix* root_targets = nullptr) {
  cfg.validate();
  const Index n = static_cast<Index>(data.size());
  require(!data.train().empty() && data.val().size() >= 2, "train_encoder: need train points and two val points");
  const bool uses_distances = cfg.lambda_dist > 0.0;
  if (uses_distances) {
    require(distances.has_value(), "train_encoder: distance loss needs a distance matrix");
    require(distances->size() == n, "train_encoder: distance matrix is " + std::to_string(distances->size()) +
                                        " points, corpus has " + std::to_string(n));
    require(detail::supervision_matches(cfg.supervision, distances->source()),
            "train_encoder: " + to_string(cfg.supervision) + " supervision given " +
                geom::to_string(distances->source()) + " distances");
  }
  if (cfg.lambda_pw > 0.0) {
    require(root_targets != nullptr && root_targets->rows() == n, "train_encoder: pointwise loss needs one target row per point");
    require(root_targets->cols() == cfg.latent_dim, "train_encoder: pointwise loss needs latent_dim = class count (" +
                                                        std::to_string(root_targets->cols()) + ")");
  }

  const Matrix& pts = data.points();
  const Index d = pts.cols();
  TrainResult res;
  res.model = make_encoder_model(d, cfg.latent_dim, cfg.hidden.empty() ? hidden_widths(d) : cfg.hidden, cfg.seed);
  res.model.supervision = cfg.supervision;
  EncoderModel& model = res.model;

  const Matrix val_points = rows_from(pts, data.val());
  const Matrix val_targets = uses_distances ? distances->slice(data.val()) : Matrix();
  res.curves.criterion = uses_distances ? "dist" : "recon";

  std::vector<std::size_t> order = data.train();
  const std::size_t full = order.size() / cfg.batch, rest = order.size() % cfg.batch;
  const long per_epoch = static_cast<long>(full + (rest >= 2 ? 1 : 0));
  require(per_epoch >= 1, "train_encoder: fewer than two training points");
  const long total_steps = per_epoch * cfg.max_epochs;

  diff::AdamW opt({0.9, 0.999, 1e-8, cfg.weight_decay});
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  double best = std::numeric_limits<double>::infinity();
  EncoderModel best_model = model;
  long step = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    double epoch_loss = 0.0;
    for (long b = 0; b < per_epoch; ++b) {
      const auto first = static_cast<std::size_t>(b) * cfg.batch;
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(first),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(first + cfg.batch, order.size())));
      const auto bsz = static_cast<Index>(idx.size());
      diff::Graph g;
      const MlpVars ev = bind(g, model.encoder), dv = bind(g, model.decoder);
      diff::Var x = g.constant(rows_from(pts, idx));
      std::vector<diff::NormalizationOut> enc_stats, dec_stats;
      try {
        diff::Var z = forward_train(model.encoder, ev, x, &enc_stats);
        std::vector<diff::Var> terms;
        if (uses_distances) terms.push_back(diff::scale(loss_dist(z, distances->slice(idx), cfg.alpha), cfg.lambda_dist));
        if (cfg.lambda_recon > 0.0 || cfg.lambda_cycle > 0.0) {
          diff::Var xr = forward_train(model.decoder, dv, z, &dec_stats);
          if (cfg.lambda_recon > 0.0) terms.push_back(diff::scale(mean_row_squared_error(xr, x), cfg.lambda_recon));
          if (cfg.lambda_cycle > 0.0) {
            diff::Var zc = forward_train(model.encoder, ev, xr);
            terms.push_back(diff::scale(mean_row_squared_error(zc, z), cfg.lambda_cycle));
          }
        }
        if (cfg.lambda_pw > 0.0)
          terms.push_back(diff::scale(loss_pointwise(z, rows_from(*root_targets, idx), cfg.zeta), cfg.lambda_pw));
        diff::Var total = terms.front();
        for (std::size_t t = 1; t < terms.size(); ++t) total = diff::add(total, terms[t]);
        g.backward(total);
        epoch_loss += total.value()(0, 0);
      } catch (const NumericError& e) {
        throw NumericError("train_encoder: diverged at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step) + ": " + e.what());
      }
      // The decoder joins the optimizer only when a loss reaches it, which
      // is fixed by the config, so the parameter list never changes.
      std::vector<Matrix*> params = model.encoder.parameters();
      std::vector<const Matrix*> grads = gradients(ev);
      if (!dec_stats.empty()) {
        const auto dp = model.decoder.parameters();
        const auto dg = gradients(dv);
        params.insert(params.end(), dp.begin(), dp.end());
        grads.insert(grads.end(), dg.begin(), dg.end());
      }
      opt.step(params, grads, diff::warmup_cosine_lr(step, total_steps, cfg.lr, cfg.warmup_fraction));
      update_running(model.encoder, enc_stats, bsz);
      if (!dec_stats.empty()) update_running(model.decoder, dec_stats, bsz);
      ++step;
    }
    const double val = validation_loss(model, val_points, val_targets, cfg);
    if (!std::isfinite(val))
      throw NumericError("train_encoder: non-finite validation loss at epoch " + std::to_string(epoch));
    res.curves.train_loss.push_back(epoch_loss / static_cast<double>(per_epoch));
    res.curves.val_loss.push_back(val);
    if (val < best) {
      best = val;
      best_model = model;
      res.curves.best_epoch = epoch;
    } else if (epoch - res.curves.best_epoch >= cfg.patience) {
      res.curves.early_stopped = true;
      break;
    }
  }
  res.model = std::move(best_model);
  return res;
}

struct DistanceMatch {
  double accuracy = 0.0;     // 1 - MSE / Var(targets)
  double correlation = 0.0;  // Pearson r of latent vs target distances
};

/// Distance-matching quality over the unordered pairs of `points`.
inline DistanceMatch distance_matching_accuracy(const EncoderModel& m, const Matrix& points, const Matrix& targets) {
  require(targets.rows() == points.rows() && targets.cols() == points.rows() && points.rows() >= 2,
          "distance_matching_accuracy: shape mismatch");
  const Matrix lat = latent_distances(m.encode_rows(points));
  std::vector<double> a, b;
  for (Index i = 0; i < points.rows(); ++i)
    for (Index j = i + 1; j < points.rows(); ++j) a.push_back(lat(i, j)), b.push_back(targets(i, j));
  const double np = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) ma += a[k], mb += b[k];
  ma /= np, mb /= np;
  double sab = 0, saa = 0, sbb = 0, mse = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
    mse += (a[k] - b[k]) * (a[k] - b[k]);
  }
  require(sbb > 0.0, "distance_matching_accuracy: target distances have zero variance");
  DistanceMatch out;
  out.accuracy = 1.0 - (mse / np) / (sbb / np);
  out.correlation = saa > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
  return out;
}

}  // namespace geosteer::encoder
