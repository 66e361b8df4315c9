#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mpts/mmd.hpp"
#include "mpts/model.hpp"
#include "mpts/rng.hpp"

namespace mpts {

class PoolState;

/// Source of the MMD bandwidths used during a training round.
struct KernelChoice {
  /// Empty: median heuristic on the first regularization batch of the round.
  std::vector<double> bandwidths;
  /// With the median heuristic, use {sigma/2, sigma, 2 sigma}.
  bool multi_scale = false;
};

struct TrainConfig {
  std::size_t epochs = 100;
  double base_lr = 1e-3;
  std::size_t batch_size = 64;
  double lambda = 0.1;
  double weight_decay = 1e-4;
  std::size_t n_checkpoints = 5;
  double lr_floor_ratio = 0.1;
  KernelChoice kernel;
  std::uint64_t seed = 0;

  /// Throws ConfigError on invalid combinations.
  void validate() const;
};

/// Constant base_lr for the first epochs/2 epochs; the remaining steps are
/// split into n_checkpoints cycles (boundaries at floor(i*H/n)), each decaying
/// linearly from base_lr to base_lr*lr_floor_ratio.
double cyclic_lr(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& config);

/// Global step indices (0-based) at which trajectory snapshots are taken:
/// the last step of each cycle.
std::vector<std::size_t> checkpoint_steps(std::size_t steps_per_epoch,
                                          const TrainConfig& config);

/// Steps in one epoch over a labeled set of the given size: ceil(n / batch).
std::size_t steps_per_epoch(std::size_t labeled_count, std::size_t batch_size);

/// Uniform batch from `from`: without replacement if from.size() >= batch_size,
/// otherwise with replacement.
std::vector<std::size_t> sample_batch(Rng& rng, std::span<const std::size_t> from,
                                      std::size_t batch_size);

/// theta <- theta - lr * (g + weight_decay * theta), element-wise.
/// Throws DivergedError (tagged with `step`) on a non-finite gradient.
void sgd_step(MlpParams& params, const MlpGrads& grads, double lr, double weight_decay,
              std::size_t step = 0);

struct Objective {
  double ce = 0.0;
  double mmd2 = 0.0;
  MlpGrads grads;
};

/// CE(labeled batch) + lambda * MMD^2(features(labeled), features(pool)).
/// The MMD gradient reaches the feature extractor through both batches.
/// With lambda == 0 the MMD value is still computed but no MMD gradient is
/// formed. Forward passes run in train mode (dropout draws from `dropout_rng`,
/// labeled batch first).
Objective objective(const MlpParams& params, const Matrix& x_labeled,
                    std::span<const int> y_labeled, const Matrix& x_pool, double lambda,
                    const KernelSpec& kernel, Rng& dropout_rng);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_ce = 0.0;
  double mean_mmd2 = 0.0;
  double lr = 0.0;  // rate used at the epoch's last step
};

class CheckpointSet {
 public:
  CheckpointSet() = default;
  explicit CheckpointSet(std::vector<ParamSnapshot> snapshots);

  void push_back(ParamSnapshot s);
  std::size_t size() const noexcept { return snapshots_.size(); }
  bool empty() const noexcept { return snapshots_.empty(); }
  const ParamSnapshot& operator[](std::size_t i) const { return snapshots_[i]; }
  auto begin() const { return snapshots_.begin(); }
  auto end() const { return snapshots_.end(); }

 private:
  std::vector<ParamSnapshot> snapshots_;
};

struct TrainResult {
  MlpParams final_params;
  CheckpointSet trajectory;
  std::vector<std::size_t> snapshot_steps;
  std::vector<EpochStats> history;
  KernelSpec kernel{1.0};
};

/// One training round from a fresh initialization.
///
/// Streams derived from config.seed: "init" for weights, "batch" for batch
/// indices, "dropout" for masks. Every step draws the labeled batch and then
/// the pool batch from the "batch" stream, regardless of lambda; this is the
/// RNG contract a CE-only reference must follow to reproduce lambda = 0 runs.
TrainResult train_round(const PoolState& pool, const ModelSpec& model,
                        const TrainConfig& config);

void write_history_csv(const std::vector<EpochStats>& history,
                       const std::filesystem::path& path);

}  // namespace mpts
