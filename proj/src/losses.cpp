#include "tilelane/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace tilelane {

namespace {

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// -p log(sigmoid z) - (1 - p) log(1 - sigmoid z), stable for any z.
double bce_logit(double z, double p) {
  return std::max(z, 0.0) - z * p + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

LossOutput offsets_loss(double r_pred, double dz_pred, double r, double dz) {
  return {std::abs(r_pred - r) + std::abs(dz_pred - dz), {sign0(r_pred - r), sign0(dz_pred - dz)}};
}

LossOutput angle_loss(std::span<const double> logits, std::span<const double> residuals,
                      const AngleEncoding& target) {
  const size_t n = target.probs.size();
  if (logits.size() != n || residuals.size() != n) {
    throw std::invalid_argument("angle_loss: bin count mismatch");
  }
  LossOutput out;
  out.grad.assign(2 * n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    out.value += bce_logit(logits[i], target.probs[i]);
    out.grad[i] = sigmoid(logits[i]) - target.probs[i];
    if (target.mask[i]) {
      const double d = residuals[i] - target.residuals[i];
      out.value += std::abs(d);
      out.grad[n + i] = sign0(d);
    }
  }
  return out;
}

LossOutput score_loss(double logit, double c) {
  return {bce_logit(logit, c), {sigmoid(logit) - c}};
}

double soft_label_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
    if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  }
  return h;
}

GridLossOutput tiles_loss(const PredictionGrid& preds, const TargetGrid& targets) {
  if (preds.tiles.size() != targets.tiles.size()) {
    throw std::invalid_argument("tiles_loss: prediction grid has " +
                                std::to_string(preds.tiles.size()) + " tiles, targets have " +
                                std::to_string(targets.tiles.size()));
  }
  GridLossOutput out;
  out.grad.resize(preds.tiles.size());
  for (size_t k = 0; k < preds.tiles.size(); ++k) {
    const TilePrediction& p = preds.tiles[k];
    const TileTarget& t = targets.tiles[k];
    TilePrediction& g = out.grad[k];
    g.bin_logits.assign(p.bin_logits.size(), 0.0);
    g.residuals.assign(p.residuals.size(), 0.0);
    g.embedding.assign(p.embedding.size(), 0.0);
    g.log_var = {0.0, 0.0, 0.0};
    g.r = g.dz = 0.0;

    const LossOutput s = score_loss(p.score_logit, t.occupied ? 1.0 : 0.0);
    out.value += s.value;
    g.score_logit = s.grad[0];
    if (!t.occupied) continue;

    const LossOutput a = angle_loss(p.bin_logits, p.residuals, t.angle);
    out.value += a.value;
    const size_t n = p.bin_logits.size();
    for (size_t i = 0; i < n; ++i) {
      g.bin_logits[i] = a.grad[i];
      g.residuals[i] = a.grad[n + i];
    }
    const LossOutput o = offsets_loss(p.r, p.dz, t.r, t.dz);
    out.value += o.value;
    g.r = o.grad[0];
    g.dz = o.grad[1];
  }
  return out;
}

EmbeddingLossOutput embedding_loss(const std::vector<std::vector<double>>& embeddings,
                                   const std::vector<int>& lane_ids, double delta_pull,
                                   double delta_push) {
  if (embeddings.size() != lane_ids.size()) {
    throw std::invalid_argument("embedding_loss: embeddings and lane ids differ in length");
  }
  EmbeddingLossOutput out;
  out.grad.resize(embeddings.size());

  std::map<int, std::vector<size_t>> members;
  for (size_t k = 0; k < lane_ids.size(); ++k) {
    if (lane_ids[k] >= 0) members[lane_ids[k]].push_back(k);
  }
  if (members.empty()) return out;
  const size_t dim = embeddings[members.begin()->second.front()].size();
  for (const auto& [id, idx] : members) {
    for (size_t k : idx) out.grad[k].assign(dim, 0.0);
  }

  const double c = static_cast<double>(members.size());
  std::vector<Eigen::VectorXd> means;
  std::vector<const std::vector<size_t>*> groups;
  for (const auto& [id, idx] : members) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
    for (size_t k : idx) mu += Eigen::Map<const Eigen::VectorXd>(embeddings[k].data(), dim);
    mu /= static_cast<double>(idx.size());
    means.push_back(mu);
    groups.push_back(&idx);
  }

  // Gradient with respect to each cluster mean, distributed to members at the end.
  std::vector<Eigen::VectorXd> grad_mean(means.size(), Eigen::VectorXd::Zero(dim));

  for (size_t ci = 0; ci < means.size(); ++ci) {
    const auto& idx = *groups[ci];
    const double nc = static_cast<double>(idx.size());
    const double w = 1.0 / (c * nc);
    for (size_t k : idx) {
      Eigen::Map<const Eigen::VectorXd> f(embeddings[k].data(), dim);
      const Eigen::VectorXd diff = means[ci] - f;
      const double dist = diff.norm();
      const double h = dist - delta_pull;
      if (h <= 0.0 || dist <= 0.0) continue;
      out.pull += w * h * h;
      const Eigen::VectorXd u = diff / dist;
      // d/d mean of h^2 is 2 h u; d/d f is -2 h u.
      grad_mean[ci] += w * 2.0 * h * u;
      Eigen::Map<Eigen::VectorXd> gf(out.grad[k].data(), dim);
      gf -= w * 2.0 * h * u;
    }
  }

  if (means.size() > 1) {
    const double w = 1.0 / (c * (c - 1.0));
    for (size_t a = 0; a < means.size(); ++a) {
      for (size_t b = 0; b < means.size(); ++b) {
        if (a == b) continue;
        const Eigen::VectorXd diff = means[a] - means[b];
        const double dist = diff.norm();
        const double h = delta_push - dist;
        if (h <= 0.0) continue;
        out.push += w * h * h;
        if (dist <= 0.0) continue;
        const Eigen::VectorXd v = diff / dist;
        grad_mean[a] -= w * 2.0 * h * v;
        grad_mean[b] += w * 2.0 * h * v;
      }
    }
  }

  for (size_t ci = 0; ci < means.size(); ++ci) {
    const auto& idx = *groups[ci];
    const Eigen::VectorXd share = grad_mean[ci] / static_cast<double>(idx.size());
    for (size_t k : idx) Eigen::Map<Eigen::VectorXd>(out.grad[k].data(), dim) += share;
  }
  out.value = out.pull + out.push;
  return out;
}

LossOutput nll_loss(double log_var, double squared_error) {
  if (squared_error < 0.0) throw std::invalid_argument("nll_loss: squared error must be >= 0");
  const double scaled = squared_error * std::exp(-log_var);
  return {0.5 * log_var + 0.5 * scaled, {0.5 - 0.5 * scaled}};
}

LossOutput nll_loss(double mu, double log_var, double y) {
  const double e = y - mu;
  const double inv = std::exp(-log_var);
  return {0.5 * log_var + 0.5 * e * e * inv, {-e * inv, 0.5 - 0.5 * e * e * inv}};
}

}  // namespace tilelane
