#include "tilelane/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tilelane {

void ModelConfig::validate() const {
  if (n_bins < 4) throw std::invalid_argument("model: n_bins must be >= 4");
  if (embedding_dim < 1) throw std::invalid_argument("model: embedding_dim must be >= 1");
  if (hidden < 1) throw std::invalid_argument("model: hidden must be >= 1");
  if (patch_k < 0) throw std::invalid_argument("model: patch_k must be >= 0");
  if (upsample < 1) throw std::invalid_argument("model: upsample must be >= 1");
}

ToyPredictor ToyPredictor::zeros(const ModelConfig& config) {
  config.validate();
  ToyPredictor m;
  m.config = config;
  m.w1 = Eigen::MatrixXd::Zero(config.hidden, config.input_dim());
  m.b1 = Eigen::VectorXd::Zero(config.hidden);
  m.w2 = Eigen::MatrixXd::Zero(config.output_dim(), config.hidden);
  m.b2 = Eigen::VectorXd::Zero(config.output_dim());
  return m;
}

ToyPredictor ToyPredictor::initialize(const ModelConfig& config, std::uint64_t seed) {
  ToyPredictor m = zeros(config);
  Rng rng(seed ^ 0x6A09E667F3BCC909ULL);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(config.input_dim()));
  for (Eigen::Index c = 0; c < m.w1.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.w1.rows(); ++r) m.w1(r, c) = rng.normal(0.0, s1);
  }
  const double s2 = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  for (Eigen::Index c = 0; c < m.w2.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.w2.rows(); ++r) m.w2(r, c) = rng.normal(0.0, s2);
  }
  // Start with a background prior and generous variances.
  m.b2(config.score_col()) = -2.0;
  for (int k = 0; k < 3; ++k) {
    m.w2.row(config.log_var_col() + k).setZero();
    m.b2(config.log_var_col() + k) = -2.0;
  }
  return m;
}

bool ToyPredictor::finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

ModelGradients ModelGradients::zeros_like(const ToyPredictor& model) {
  return {Eigen::MatrixXd::Zero(model.w1.rows(), model.w1.cols()),
          Eigen::VectorXd::Zero(model.b1.size()),
          Eigen::MatrixXd::Zero(model.w2.rows(), model.w2.cols()),
          Eigen::VectorXd::Zero(model.b2.size())};
}

double ModelGradients::squared_norm() const {
  return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm();
}

namespace {

void check_raster(const ObservationRaster& raster, const GridConfig& grid, const ModelConfig& config) {
  const int w = grid.width_tiles * config.upsample;
  const int h = grid.height_tiles * config.upsample;
  if (raster.width != w || raster.height != h) {
    throw std::invalid_argument("raster is " + std::to_string(raster.width) + "x" +
                                std::to_string(raster.height) + " cells, grid expects " +
                                std::to_string(w) + "x" + std::to_string(h));
  }
}

int patch_origin(int tile, const ModelConfig& config) {
  return config.upsample * tile + config.upsample / 2 - 2 * config.patch_k;
}

}  // namespace

std::vector<std::pair<int, int>> receptive_cells(const GridConfig& grid, const ModelConfig& config,
                                                 int i, int j) {
  const int side = config.patch_side();
  const int u0 = patch_origin(i, config);
  const int v0 = patch_origin(j, config);
  const int w = grid.width_tiles * config.upsample;
  const int h = grid.height_tiles * config.upsample;
  std::vector<std::pair<int, int>> cells;
  for (int dv = 0; dv < side; ++dv) {
    for (int du = 0; du < side; ++du) {
      const int u = u0 + du;
      const int v = v0 + dv;
      if (u >= 0 && u < w && v >= 0 && v < h) cells.emplace_back(u, v);
    }
  }
  return cells;
}

RowMatrix tile_features(const ObservationRaster& raster, const GridConfig& grid,
                        const ModelConfig& config) {
  config.validate();
  check_raster(raster, grid, config);
  const int side = config.patch_side();
  const int area = side * side;
  RowMatrix x = RowMatrix::Zero(grid.tile_count(), config.input_dim());
  for (int j = 0; j < grid.height_tiles; ++j) {
    for (int i = 0; i < grid.width_tiles; ++i) {
      const int row = grid.flat(i, j);
      const int u0 = patch_origin(i, config);
      const int v0 = patch_origin(j, config);
      for (int dv = 0; dv < side; ++dv) {
        const int v = v0 + dv;
        if (v < 0 || v >= raster.height) continue;
        for (int du = 0; du < side; ++du) {
          const int u = u0 + du;
          if (u < 0 || u >= raster.width) continue;
          const int idx = raster.index(u, v);
          x(row, dv * side + du) = raster.evidence[idx];
          x(row, area + dv * side + du) = raster.heights[idx];
        }
      }
      if (config.position_features) {
        const Vec2 c = tile_center(grid, i, j);
        x(row, 2 * area) = c.x() / 10.0;
        x(row, 2 * area + 1) = c.y() / 40.0 - 1.0;
      }
    }
  }
  return x;
}

ForwardCache forward(const ToyPredictor& model, RowMatrix input) {
  if (input.cols() != model.w1.cols()) {
    throw std::invalid_argument("forward: input has " + std::to_string(input.cols()) +
                                " features, model expects " + std::to_string(model.w1.cols()));
  }
  ForwardCache cache;
  cache.input = std::move(input);
  cache.hidden = cache.input * model.w1.transpose();
  cache.hidden.rowwise() += model.b1.transpose();
  cache.hidden = cache.hidden.array().tanh();
  cache.output = cache.hidden * model.w2.transpose();
  cache.output.rowwise() += model.b2.transpose();
  return cache;
}

PredictionGrid to_predictions(const RowMatrix& output, const GridConfig& grid,
                              const ModelConfig& config) {
  if (output.rows() != grid.tile_count() || output.cols() != config.output_dim()) {
    throw std::invalid_argument("to_predictions: output shape does not match grid and config");
  }
  PredictionGrid preds;
  preds.grid = grid;
  preds.tiles.resize(grid.tile_count());
  const int n = config.n_bins;
  for (int k = 0; k < grid.tile_count(); ++k) {
    TilePrediction& p = preds.tiles[k];
    auto row = output.row(k);
    p.score_logit = row(config.score_col());
    p.r = row(config.r_col());
    p.dz = row(config.dz_col());
    p.bin_logits.resize(n);
    p.residuals.resize(n);
    for (int b = 0; b < n; ++b) {
      p.bin_logits[b] = row(config.bins_col() + b);
      p.residuals[b] = row(config.residuals_col() + b);
    }
    p.embedding.resize(config.embedding_dim);
    for (int e = 0; e < config.embedding_dim; ++e) p.embedding[e] = row(config.embedding_col() + e);
    for (int v = 0; v < 3; ++v) p.log_var[v] = row(config.log_var_col() + v);
  }
  return preds;
}

RowMatrix pack_output_gradient(const std::vector<TilePrediction>& grad, const ModelConfig& config) {
  RowMatrix g = RowMatrix::Zero(static_cast<Eigen::Index>(grad.size()), config.output_dim());
  for (size_t k = 0; k < grad.size(); ++k) {
    const TilePrediction& t = grad[k];
    auto row = g.row(static_cast<Eigen::Index>(k));
    row(config.score_col()) = t.score_logit;
    row(config.r_col()) = t.r;
    row(config.dz_col()) = t.dz;
    for (size_t b = 0; b < t.bin_logits.size(); ++b) row(config.bins_col() + b) = t.bin_logits[b];
    for (size_t b = 0; b < t.residuals.size(); ++b) row(config.residuals_col() + b) = t.residuals[b];
    for (size_t e = 0; e < t.embedding.size(); ++e) row(config.embedding_col() + e) = t.embedding[e];
    for (int v = 0; v < 3; ++v) row(config.log_var_col() + v) = t.log_var[v];
  }
  return g;
}

ModelGradients backward(const ToyPredictor& model, const ForwardCache& cache,
                        const RowMatrix& upstream, TrainStage stage) {
  if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols()) {
    throw std::invalid_argument("backward: upstream gradient shape mismatch");
  }
  ModelGradients g = ModelGradients::zeros_like(model);
  const ModelConfig& cfg = model.config;
  if (stage == TrainStage::kUncertainty) {
    const int c0 = cfg.log_var_col();
    g.w2.middleRows(c0, 3) = upstream.middleCols(c0, 3).transpose() * cache.hidden;
    g.b2.segment(c0, 3) = upstream.middleCols(c0, 3).colwise().sum().transpose();
    return g;
  }
  g.w2 = upstream.transpose() * cache.hidden;
  g.b2 = upstream.colwise().sum().transpose();
  RowMatrix dh = upstream * model.w2;
  dh.array() *= 1.0 - cache.hidden.array().square();
  g.w1 = dh.transpose() * cache.input;
  g.b1 = dh.colwise().sum().transpose();
  return g;
}

AdamOptimizer::AdamOptimizer(const ToyPredictor& model, Options options)
    : options_(options), m_(ModelGradients::zeros_like(model)), v_(ModelGradients::zeros_like(model)) {}

namespace {

template <typename P>
void adam_update(P& param, const P& grad, P& m, P& v, double beta1, double beta2, double eps,
                 double lr, double bc1, double bc2) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace

void AdamOptimizer::step(ToyPredictor& model, const ModelGradients& grad, double lr) {
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double bc1 = b1 > 0.0 ? 1.0 - std::pow(b1, static_cast<double>(steps_)) : 1.0;
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  adam_update(model.w1, grad.w1, m_.w1, v_.w1, b1, b2, options_.epsilon, lr, bc1, bc2);
  adam_update(model.b1, grad.b1, m_.b1, v_.b1, b1, b2, options_.epsilon, lr, bc1, bc2);
  adam_update(model.w2, grad.w2, m_.w2, v_.w2, b1, b2, options_.epsilon, lr, bc1, bc2);
  adam_update(model.b2, grad.b2, m_.b2, v_.b2, b1, b2, options_.epsilon, lr, bc1, bc2);
}

}  // namespace tilelane
