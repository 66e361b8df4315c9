#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "mpts/dataio.hpp"
#include "mpts/rng.hpp"

namespace mpts {

/// Dataset plus the labeled / unlabeled / test partition of its rows.
class PoolState {
 public:
  PoolState(std::shared_ptr<const Dataset> data, std::vector<std::size_t> labeled,
            std::vector<std::size_t> unlabeled, std::vector<std::size_t> test);

  const Dataset& dataset() const noexcept { return *data_; }
  std::shared_ptr<const Dataset> dataset_ptr() const noexcept { return data_; }
  const Matrix& features() const noexcept { return data_->features; }
  std::span<const int> labels() const noexcept { return data_->labels; }
  std::size_t class_count() const noexcept { return data_->class_count; }

  /// In acquisition order.
  const std::vector<std::size_t>& labeled() const noexcept { return labeled_; }
  /// Ascending.
  const std::vector<std::size_t>& unlabeled() const noexcept { return unlabeled_; }
  const std::vector<std::size_t>& test() const noexcept { return test_; }

  /// Labeled and unlabeled indices together, ascending.
  std::vector<std::size_t> training_pool() const;

  /// Move `indices` from unlabeled to labeled (appended in the given order).
  /// Throws StateError naming the first index that is not unlabeled or repeats.
  void label(std::span<const std::size_t> indices);

  /// Throws StateError if the partition is not disjoint and exhaustive.
  void check_invariants() const;

 private:
  std::shared_ptr<const Dataset> data_;
  std::vector<std::size_t> labeled_;
  std::vector<std::size_t> unlabeled_;
  std::vector<std::size_t> test_;
};

struct TestSplit {
  enum class Kind { designated, holdout };
  Kind kind = Kind::designated;
  double fraction = 0.0;

  static TestSplit designated() { return {}; }
  static TestSplit holdout(double f) { return {Kind::holdout, f}; }
};

/// Uniform (unstratified) random initial labeled set. With `bias_classes`
/// nonempty the initial set is drawn only from rows of those classes.
PoolState init_pool(std::shared_ptr<const Dataset> data, std::size_t initial_count,
                    TestSplit split, Rng& rng, std::span<const int> bias_classes = {});

/// Functional form of PoolState::label.
PoolState label_points(PoolState pool, std::span<const std::size_t> indices);

}  // namespace mpts
