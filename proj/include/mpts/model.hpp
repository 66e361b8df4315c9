#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "mpts/matrix.hpp"
#include "mpts/rng.hpp"

namespace mpts {

struct Layer {
  Matrix w;               // fan_in x fan_out
  std::vector<double> b;  // fan_out

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// MLP with a feature-extractor prefix.
///
/// The first `split_index` layers form the feature extractor; features are
/// the (post-ReLU, post-dropout) activations leaving layer `split_index`.
/// The remaining layers form the classification head.
struct MlpParams {
  std::vector<Layer> layers;
  std::size_t split_index = 1;
  double dropout_rate = 0.0;

  std::size_t input_dim() const { return layers.front().w.rows(); }
  std::size_t feature_dim() const { return layers[split_index - 1].w.cols(); }
  std::size_t class_count() const { return layers.back().w.cols(); }

  /// Throws ParameterError if layers do not chain or the split is invalid.
  void validate() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Same shapes as MlpParams::layers.
using MlpGrads = std::vector<Layer>;

struct ModelSpec {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., classes
  std::size_t split_index = 1;
  double dropout_rate = 0.0;
};

/// He-normal weights (variance 2 / fan_in), zero biases.
MlpParams init_mlp(const ModelSpec& spec, Rng& rng);

struct ForwardCache {
  std::vector<Matrix> inputs;  // input seen by each layer
  std::vector<Matrix> pre;     // pre-activation of each hidden layer
  std::vector<Matrix> masks;   // dropout mask per hidden layer (may be empty)
};

struct ForwardResult {
  Matrix features;
  Matrix logits;
  ForwardCache cache;
};

/// ReLU after every layer except the last; dropout after hidden activations
/// when train_mode and dropout_rate > 0. Eval mode never touches rng.
ForwardResult forward(const MlpParams& params, const Matrix& x, bool train_mode, Rng& rng);

/// Backpropagate. `dlogits` and `dfeatures` are each optional (nullptr);
/// `dfeatures` is added at the feature-extractor output. Without dlogits the
/// head receives zero gradient.
MlpGrads backward(const MlpParams& params, const ForwardCache& cache, const Matrix* dlogits,
                  const Matrix* dfeatures);

/// Eval-mode class probabilities.
Matrix predict_proba(const MlpParams& params, const Matrix& x);

/// Eval-mode features.
Matrix extract_features(const MlpParams& params, const Matrix& x);

/// Immutable deep copy of a parameter set.
class ParamSnapshot {
 public:
  explicit ParamSnapshot(MlpParams params) : params_(std::move(params)) {}

  const MlpParams& params() const noexcept { return params_; }
  MlpParams restore() const { return params_; }

 private:
  MlpParams params_;
};

inline ParamSnapshot snapshot(const MlpParams& params) { return ParamSnapshot(params); }

MlpGrads zero_grads_like(const MlpParams& params);

/// Binary checkpoint: u64 layer count, then (rows, cols) u64 per layer, then
/// for each layer W row-major followed by b, all little-endian.
void save_params(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_params(const std::filesystem::path& path, std::size_t split_index,
                      double dropout_rate = 0.0);

}  // namespace mpts
