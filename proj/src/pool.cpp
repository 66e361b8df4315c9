#include "mpts/pool.hpp"

#include <algorithm>
#include <string>

#include "mpts/error.hpp"

namespace mpts {

PoolState::PoolState(std::shared_ptr<const Dataset> data, std::vector<std::size_t> labeled,
                     std::vector<std::size_t> unlabeled, std::vector<std::size_t> test)
    : data_(std::move(data)),
      labeled_(std::move(labeled)),
      unlabeled_(std::move(unlabeled)),
      test_(std::move(test)) {
  if (!data_) throw StateError("pool has no dataset");
  std::sort(unlabeled_.begin(), unlabeled_.end());
  std::sort(test_.begin(), test_.end());
  check_invariants();
}

std::vector<std::size_t> PoolState::training_pool() const {
  std::vector<std::size_t> all(labeled_);
  all.insert(all.end(), unlabeled_.begin(), unlabeled_.end());
  std::sort(all.begin(), all.end());
  return all;
}

void PoolState::label(std::span<const std::size_t> indices) {
  std::vector<std::size_t> remaining = unlabeled_;
  for (std::size_t idx : indices) {
    auto it = std::lower_bound(remaining.begin(), remaining.end(), idx);
    if (it == remaining.end() || *it != idx) {
      throw StateError("cannot label index " + std::to_string(idx) +
                       ": not in the unlabeled pool");
    }
    remaining.erase(it);
  }
  labeled_.insert(labeled_.end(), indices.begin(), indices.end());
  unlabeled_ = std::move(remaining);
}

void PoolState::check_invariants() const {
  const std::size_t n = data_->size();
  std::vector<char> seen(n, 0);
  auto mark = [&](const std::vector<std::size_t>& set, const char* name) {
    for (std::size_t i : set) {
      if (i >= n) {
        throw StateError(std::string(name) + " index " + std::to_string(i) +
                         " out of range");
      }
      if (seen[i]) {
        throw StateError("index " + std::to_string(i) + " appears in more than one set");
      }
      seen[i] = 1;
    }
  };
  mark(labeled_, "labeled");
  mark(unlabeled_, "unlabeled");
  mark(test_, "test");
  if (labeled_.size() + unlabeled_.size() + test_.size() != n) {
    throw StateError("partition does not cover all " + std::to_string(n) + " rows");
  }
}

PoolState init_pool(std::shared_ptr<const Dataset> data, std::size_t initial_count,
                    TestSplit split, Rng& rng, std::span<const int> bias_classes) {
  if (!data) throw StateError("init_pool: no dataset");
  const std::size_t n = data->size();
  std::vector<char> is_test(n, 0);
  std::vector<std::size_t> test;
  if (split.kind == TestSplit::Kind::designated) {
    if (data->designated_test) test = *data->designated_test;
  } else {
    if (!(split.fraction >= 0.0 && split.fraction < 1.0)) {
      throw ParameterError("test fraction must be in [0, 1)");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto k = static_cast<std::size_t>(split.fraction * static_cast<double>(n));
    test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }
  for (std::size_t i : test) {
    if (i >= n) throw StateError("test index " + std::to_string(i) + " out of range");
    is_test[i] = 1;
  }

  std::vector<std::size_t> candidates;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_test[i]) continue;
    const bool eligible =
        bias_classes.empty() ||
        std::find(bias_classes.begin(), bias_classes.end(), data->labels[i]) != bias_classes.end();
    (eligible ? candidates : rest).push_back(i);
  }
  if (initial_count > candidates.size()) {
    throw ParameterError("initial_count " + std::to_string(initial_count) + " exceeds the " +
                         std::to_string(candidates.size()) + " eligible pool rows");
  }
  // Partial Fisher-Yates: the first initial_count slots are the draw.
  for (std::size_t i = 0; i < initial_count; ++i) {
    const std::size_t j = i + rng.below(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  std::vector<std::size_t> labeled(candidates.begin(),
                                   candidates.begin() + static_cast<std::ptrdiff_t>(initial_count));
  rest.insert(rest.end(), candidates.begin() + static_cast<std::ptrdiff_t>(initial_count),
              candidates.end());
  return PoolState(std::move(data), std::move(labeled), std::move(rest), std::move(test));
}

PoolState label_points(PoolState pool, std::span<const std::size_t> indices) {
  pool.label(indices);
  return pool;
}

}  // namespace mpts
