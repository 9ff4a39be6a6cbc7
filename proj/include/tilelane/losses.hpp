#pragma once

// Training objectives. Every loss returns its value together with the
// analytic (sub)gradient with respect to the prediction inputs. Hinge and L1
// kinks use a zero subgradient.

#include "tilelane/tilecodec.hpp"

#include <span>
#include <vector>

namespace tilelane {

struct LossOutput {
  double value = 0.0;
  std::vector<double> grad;
};

/// |r_pred - r| + |dz_pred - dz|; grad = (d/d r_pred, d/d dz_pred).
LossOutput offsets_loss(double r_pred, double dz_pred, double r, double dz);

/// Per-bin sigmoid cross entropy against the soft labels plus masked L1 on
/// residuals; grad = (d/d logits..., d/d residuals...).
LossOutput angle_loss(std::span<const double> logits, std::span<const double> residuals,
                      const AngleEncoding& target);

/// Binary cross entropy on a logit; grad has one entry.
LossOutput score_loss(double logit, double c);

/// Entropy of independent Bernoulli soft labels; the minimum of the angle
/// classification term.
double soft_label_entropy(std::span<const double> probs);

struct GridLossOutput {
  double value = 0.0;
  std::vector<TilePrediction> grad;  // same layout as the prediction tiles
};

/// Sum over tiles of score loss plus occupancy-gated angle and offset losses.
GridLossOutput tiles_loss(const PredictionGrid& preds, const TargetGrid& targets);

/// Discriminative push-pull loss over tiles with lane_ids >= 0. Gradients
/// flow through the cluster means.
struct EmbeddingLossOutput {
  double value = 0.0;
  double pull = 0.0;
  double push = 0.0;
  std::vector<std::vector<double>> grad;  // per tile; empty rows for ignored tiles
};

EmbeddingLossOutput embedding_loss(const std::vector<std::vector<double>>& embeddings,
                                   const std::vector<int>& lane_ids, double delta_pull,
                                   double delta_push);

/// 0.5 * s + e2 / (2 exp(s)); grad = (d/ds).
LossOutput nll_loss(double log_var, double squared_error);

/// Same objective with e2 = (y - mu)^2; grad = (d/d mu, d/ds).
LossOutput nll_loss(double mu, double log_var, double y);

}  // namespace tilelane
