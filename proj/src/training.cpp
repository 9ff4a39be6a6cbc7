#include "tilelane/training.hpp"

#include "tilelane/losses.hpp"
#include "tilelane/pipeline.hpp"

#include <cmath>
#include <map>

namespace tilelane {

SceneLoss scene_loss(const RowMatrix& output, const TargetGrid& targets, const ExperimentConfig& cfg) {
  const ModelConfig& mc = cfg.model;
  const PredictionGrid preds = to_predictions(output, targets.grid, mc);
  GridLossOutput tl = tiles_loss(preds, targets);
  SceneLoss out;
  out.tiles = tl.value;
  out.grad = pack_output_gradient(tl.grad, mc);

  std::vector<std::vector<double>> emb;
  std::vector<int> ids;
  std::vector<int> rows;
  for (size_t k = 0; k < targets.tiles.size(); ++k) {
    if (!targets.tiles[k].occupied) continue;
    emb.push_back(preds.tiles[k].embedding);
    ids.push_back(targets.tiles[k].lane_id);
    rows.push_back(static_cast<int>(k));
  }
  if (!emb.empty() && cfg.loss.embedding_weight > 0.0) {
    const EmbeddingLossOutput el = embedding_loss(emb, ids, cfg.loss.delta_pull, cfg.loss.delta_push);
    out.embedding = el.value;
    const double w = cfg.loss.embedding_weight;
    for (size_t q = 0; q < rows.size(); ++q) {
      for (int e = 0; e < mc.embedding_dim; ++e) {
        out.grad(rows[q], mc.embedding_col() + e) += w * el.grad[q][e];
      }
    }
  }
  return out;
}

namespace {

double scheduled_lr(double base, int step, int total, const TrainConfig& t) {
  return step < t.decay_fraction * total ? base : base * t.decay_factor;
}

class WindowLogger {
 public:
  WindowLogger(const TrainLogger& logger, std::string stage, int every)
      : logger_(logger), stage_(std::move(stage)), every_(every) {}
  void add(int step, double loss, double lr) {
    sum_ += loss;
    ++count_;
    if ((step + 1) % every_ == 0) flush(step, lr);
  }
  void flush(int step, double lr) {
    if (count_ == 0) return;
    if (logger_) logger_({stage_, step + 1, sum_ / count_, lr});
    sum_ = 0.0;
    count_ = 0;
  }

 private:
  const TrainLogger& logger_;
  std::string stage_;
  int every_;
  double sum_ = 0.0;
  int count_ = 0;
};

}  // namespace

StageResult train_means(const std::vector<SceneSample>& samples, const ExperimentConfig& cfg,
                        std::uint64_t seed, const TrainLogger& logger) {
  if (samples.empty()) throw std::invalid_argument("train: dataset is empty");
  const GridConfig& grid = cfg.grid;
  const ModelConfig& mc = cfg.model;
  const TrainConfig& tc = cfg.train;
  std::vector<TargetGrid> targets;
  targets.reserve(samples.size());
  for (const SceneSample& s : samples) targets.push_back(encode_targets(s.scene, grid, mc.n_bins));

  StageResult res{ToyPredictor::initialize(mc, seed), {}};
  AdamOptimizer opt(res.model, {tc.beta1, tc.beta2, 1e-8});
  Rng rng(seed ^ 0xBB67AE8584CAA73BULL);
  const int tiles = grid.tile_count();
  const int batch = tc.batch_scenes;
  WindowLogger log(logger, "means", tc.log_every);

  for (int step = 0; step < tc.steps_means; ++step) {
    std::vector<int> pick(batch);
    for (int& p : pick) p = rng.uniform_int(0, static_cast<int>(samples.size()) - 1);
    RowMatrix x(static_cast<Eigen::Index>(batch) * tiles, mc.input_dim());
    for (int b = 0; b < batch; ++b) {
      x.middleRows(static_cast<Eigen::Index>(b) * tiles, tiles) = tile_features(samples[pick[b]].raster, grid, mc);
    }
    const ForwardCache cache = forward(res.model, std::move(x));
    RowMatrix upstream(cache.output.rows(), cache.output.cols());
    double loss = 0.0;
    for (int b = 0; b < batch; ++b) {
      const RowMatrix out = cache.output.middleRows(static_cast<Eigen::Index>(b) * tiles, tiles);
      const SceneLoss sl = scene_loss(out, targets[pick[b]], cfg);
      loss += (sl.tiles + cfg.loss.embedding_weight * sl.embedding) / batch;
      upstream.middleRows(static_cast<Eigen::Index>(b) * tiles, tiles) = sl.grad / batch;
    }
    if (!std::isfinite(loss)) {
      throw DivergenceError("stage 1 loss is not finite at step " + std::to_string(step), step - 1);
    }
    const double lr = scheduled_lr(tc.lr, step, tc.steps_means, tc);
    opt.step(res.model, backward(res.model, cache, upstream, TrainStage::kMeans), lr);
    if (!res.model.finite()) {
      throw DivergenceError("stage 1 weights are not finite after step " + std::to_string(step), step - 1);
    }
    res.losses.push_back(loss);
    log.add(step, loss, lr);
  }
  return res;
}

StageResult train_uncertainty(const ToyPredictor& model, const std::vector<SceneSample>& samples,
                              const ExperimentConfig& cfg, UncertaintySupervision supervision,
                              const TrainLogger& logger) {
  if (samples.empty()) throw std::invalid_argument("train: dataset is empty");
  const GridConfig& grid = cfg.grid;
  const ModelConfig& mc = cfg.model;
  const TrainConfig& tc = cfg.train;

  // Squared errors depend only on the frozen means, so they are gathered once
  // together with the hidden features of their tiles.
  std::vector<Eigen::RowVectorXd> hidden_rows;
  std::vector<std::array<double, 3>> errors;
  for (const SceneSample& s : samples) {
    const ForwardCache cache = forward(model, tile_features(s.raster, grid, mc));
    std::vector<SceneSample> single{s};
    for (const SERecord& r : collect_se(model, single, cfg, supervision)) {
      hidden_rows.push_back(cache.hidden.row(r.tile));
      errors.push_back(r.se);
    }
  }
  if (hidden_rows.empty()) throw std::runtime_error("train: no squared-error records for the variance head");
  const Eigen::Index n = static_cast<Eigen::Index>(hidden_rows.size());
  RowMatrix h(n, mc.hidden);
  RowMatrix e(n, 3);
  for (Eigen::Index k = 0; k < n; ++k) {
    h.row(k) = hidden_rows[k];
    for (int q = 0; q < 3; ++q) e(k, q) = errors[k][q];
  }

  StageResult res{model, {}};
  AdamOptimizer opt(res.model, {tc.beta1, tc.beta2, 1e-8});
  WindowLogger log(logger, "uncertainty", tc.log_every);
  const int c0 = mc.log_var_col();
  for (int step = 0; step < tc.steps_uncertainty; ++step) {
    RowMatrix s = h * res.model.w2.middleRows(c0, 3).transpose();
    s.rowwise() += res.model.b2.segment(c0, 3).transpose();
    const RowMatrix scaled = e.array() * (-s.array()).exp();
    const double loss = (0.5 * s.array() + 0.5 * scaled.array()).sum() / static_cast<double>(n);
    if (!std::isfinite(loss)) {
      throw DivergenceError("stage 2 loss is not finite at step " + std::to_string(step), step - 1);
    }
    const RowMatrix g = (0.5 - 0.5 * scaled.array()) / static_cast<double>(n);
    ModelGradients grad = ModelGradients::zeros_like(res.model);
    grad.w2.middleRows(c0, 3) = g.transpose() * h;
    grad.b2.segment(c0, 3) = g.colwise().sum().transpose();
    const double lr = scheduled_lr(tc.lr_uncertainty, step, tc.steps_uncertainty, tc);
    opt.step(res.model, grad, lr);
    res.losses.push_back(loss);
    log.add(step, loss, lr);
  }
  return res;
}

}  // namespace tilelane
