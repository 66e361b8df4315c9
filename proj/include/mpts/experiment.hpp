#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpts/dataio.hpp"
#include "mpts/model.hpp"
#include "mpts/pool.hpp"
#include "mpts/trainer.hpp"

namespace mpts {

enum class Method { mpts, random, entropy, bald, coreset };

std::string_view method_name(Method m) noexcept;
/// Throws ConfigError for unknown names.
Method parse_method(std::string_view name);

struct DatasetConfig {
  enum class Kind { synthetic, mnist, csv };
  enum class Standardize { none, pool, labeled };

  Kind kind = Kind::synthetic;
  // mnist
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  // csv
  std::string path;
  std::string label_column;  // empty: last column
  // synthetic
  std::size_t classes = 4;
  std::size_t per_class = 250;
  std::size_t dim = 8;
  double separation = 6.0;
  // csv and synthetic
  double test_fraction = 0.2;
  std::size_t pool_size = 0;  // 0 keeps every non-test row
  Standardize standardize = Standardize::pool;
};

struct ModelConfig {
  std::vector<std::size_t> hidden;  // empty: [128] for mnist, [64, 64] otherwise
  std::size_t split_index = 0;      // 0: last hidden layer
};

struct BaldConfig {
  std::size_t passes = 20;
  double dropout = 0.5;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::size_t initial_count = 100;
  std::size_t budget = 100;
  std::size_t rounds = 5;
  std::size_t repeats = 5;
  std::vector<Method> methods;
  TrainConfig train;
  ModelConfig model;
  BaldConfig bald;
  std::vector<int> bias_classes;
  std::uint64_t master_seed = 0;
  std::string output_dir;
  bool record_wall_time = false;
  bool dump_scores = false;
  bool dump_history = false;

  /// Throws ConfigError on invariant violations.
  void validate() const;
  /// Concrete layer sizes for data of the given shape.
  ModelSpec model_spec(std::size_t input_dim, std::size_t classes, Method method) const;
};

struct RoundLog {
  std::string method;
  std::size_t repeat = 0;
  std::size_t round = 0;
  std::size_t labeled_count = 0;
  std::uint64_t repeat_seed = 0;
  double test_accuracy = 0.0;
  double wall_time_seconds = 0.0;
};

/// Test accuracy of arg-max predictions (ties to the lowest class).
double evaluate(const MlpParams& params, const PoolState& pool);
/// Same, using the trajectory-averaged predictor.
double evaluate(const CheckpointSet& trajectory, const PoolState& pool);
/// Accuracy of a probability matrix against labels of `rows`.
double accuracy(const Matrix& probs, std::span<const int> labels,
                std::span<const std::size_t> rows);

/// Load, split and subsample the configured dataset. Deterministic in master_seed.
Dataset load_dataset(const DatasetConfig& config, std::uint64_t master_seed);

struct RunOptions {
  std::size_t jobs = 1;
  /// Called after every evaluated round; invocations are serialized.
  std::function<void(const RoundLog&)> progress;
};

/// Full (method x repeat) grid. Methods within a repeat share the initial
/// pool and the per-round initialization seed. Output is sorted by
/// (method, repeat, round) and identical for any job count.
std::vector<RoundLog> run_experiment(const ExperimentConfig& config, const RunOptions& options = {});
std::vector<RoundLog> run_experiment(const ExperimentConfig& config, const Dataset& data,
                                     const RunOptions& options = {});

}  // namespace mpts
