#pragma once

// Per-tile predictor: a shared two-layer perceptron applied to each tile's
// receptive patch of the observation raster.

#include "tilelane/geometry.hpp"
#include "tilelane/scenegen.hpp"
#include "tilelane/tilecodec.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace tilelane {

struct ModelConfig {
  int n_bins = 16;
  int embedding_dim = 4;
  int hidden = 96;
  int patch_k = 2;   // patch side is 4k + 1 raster cells
  int upsample = 4;  // raster cells per tile side
  bool position_features = true;

  int patch_side() const { return 4 * patch_k + 1; }
  int input_dim() const { return 2 * patch_side() * patch_side() + (position_features ? 2 : 0); }
  int output_dim() const { return 3 + 2 * n_bins + embedding_dim + 3; }

  // Output column layout.
  int score_col() const { return 0; }
  int r_col() const { return 1; }
  int dz_col() const { return 2; }
  int bins_col() const { return 3; }
  int residuals_col() const { return 3 + n_bins; }
  int embedding_col() const { return 3 + 2 * n_bins; }
  int log_var_col() const { return 3 + 2 * n_bins + embedding_dim; }

  void validate() const;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ToyPredictor {
  ModelConfig config;
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // output x hidden
  Eigen::VectorXd b2;

  static ToyPredictor initialize(const ModelConfig& config, std::uint64_t seed);
  static ToyPredictor zeros(const ModelConfig& config);
  bool finite() const;
};

/// Which parameters receive gradient.
enum class TrainStage { kMeans, kUncertainty };

struct ModelGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  static ModelGradients zeros_like(const ToyPredictor& model);
  double squared_norm() const;
};

/// One row per tile in (j, i) order. Out-of-raster cells read as zero.
RowMatrix tile_features(const ObservationRaster& raster, const GridConfig& grid,
                        const ModelConfig& config);

/// Raster cells read by tile (i, j), as raster indices (u, v) pairs clipped to
/// the raster.
std::vector<std::pair<int, int>> receptive_cells(const GridConfig& grid, const ModelConfig& config,
                                                 int i, int j);

struct ForwardCache {
  RowMatrix input;   // tiles x input
  RowMatrix hidden;  // tiles x hidden, post-activation
  RowMatrix output;  // tiles x output
};

ForwardCache forward(const ToyPredictor& model, RowMatrix input);

PredictionGrid to_predictions(const RowMatrix& output, const GridConfig& grid,
                              const ModelConfig& config);

/// Packs per-tile loss gradients into the output layout.
RowMatrix pack_output_gradient(const std::vector<TilePrediction>& grad, const ModelConfig& config);

/// Exact gradients of sum(upstream .* output) with respect to the parameters.
ModelGradients backward(const ToyPredictor& model, const ForwardCache& cache,
                        const RowMatrix& upstream, TrainStage stage = TrainStage::kMeans);

/// Adaptive per-weight step sizes (Adam); beta1 = 0 gives the momentum-free
/// RMSProp-style variant.
class AdamOptimizer {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  AdamOptimizer(const ToyPredictor& model, Options options);
  void step(ToyPredictor& model, const ModelGradients& grad, double lr);

 private:
  Options options_;
  ModelGradients m_, v_;
  long steps_ = 0;
};

}  // namespace tilelane
