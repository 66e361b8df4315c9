#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mpts/matrix.hpp"
#include "mpts/model.hpp"
#include "mpts/rng.hpp"
#include "mpts/trainer.hpp"

namespace mpts {

class PoolState;

struct AcquisitionResult {
  std::string method;
  /// Per unlabeled example (aligned with pool.unlabeled()) for score-based
  /// methods; per pick for coreset; empty for random.
  std::vector<double> scores;
  /// Pool indices, in selection order.
  std::vector<std::size_t> selected;
};

/// Mean of predict_proba over every snapshot.
Matrix avg_predict(const CheckpointSet& trajectory, const Matrix& x);

/// Shannon entropy in nats per row, with 0 ln 0 = 0. Rows must sum to 1
/// within 1e-6 (ContractError otherwise).
std::vector<double> entropy_scores(const Matrix& probs);

/// Positions of the k largest scores, by descending score then ascending
/// position. k is clamped to scores.size().
std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k);

AcquisitionResult mpts_acquire(const CheckpointSet& trajectory, const PoolState& pool,
                               std::size_t budget);

AcquisitionResult random_acquire(const PoolState& pool, std::size_t budget, Rng& rng);

AcquisitionResult entropy_acquire(const MlpParams& params, const PoolState& pool,
                                  std::size_t budget);

/// `passes` train-mode forward passes (dropout active) over x.
std::vector<Matrix> mc_dropout_probs(const MlpParams& params, const Matrix& x,
                                     std::size_t passes, Rng& rng);

/// Mutual information H(mean p) - mean H(p) per row.
std::vector<double> bald_scores(std::span<const Matrix> pass_probs);

AcquisitionResult bald_acquire(const MlpParams& params, const PoolState& pool,
                               std::size_t budget, std::size_t passes, Rng& rng);

/// Greedy k-center on eval-mode features: each pick maximizes the minimum
/// Euclidean distance to labeled and already-picked points.
AcquisitionResult coreset_acquire(const MlpParams& params, const PoolState& pool,
                                  std::size_t budget);

/// CSV with columns pool_index,score,selected.
void write_scores_csv(const AcquisitionResult& result, const PoolState& pool,
                      const std::filesystem::path& path);

}  // namespace mpts
