#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpts/matrix.hpp"
#include "mpts/rng.hpp"

namespace mpts {

struct Dataset {
  std::string name;
  Matrix features;
  std::vector<int> labels;
  std::size_t class_count = 0;
  /// Rows reserved for evaluation (e.g. the MNIST t10k files), ascending.
  std::optional<std::vector<std::size_t>> designated_test;
  /// Original label strings for CSV data, indexed by class id.
  std::vector<std::string> label_names;

  std::size_t size() const noexcept { return labels.size(); }

  /// Throws FormatError when labels/features disagree or are out of range.
  void validate() const;
};

/// Parse an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are flattened row-major and scaled by 1/255. Both plain and
/// gzip-compressed files are accepted.
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Load train files followed by test files; the test rows become the designated split.
Dataset load_mnist_split(const std::filesystem::path& train_images,
                         const std::filesystem::path& train_labels,
                         const std::filesystem::path& test_images,
                         const std::filesystem::path& test_labels);

/// Inverse of load_mnist_idx: pixels are written as round(255 * x).
void write_mnist_idx(const Dataset& data, std::size_t image_rows, std::size_t image_cols,
                     const std::filesystem::path& images, const std::filesystem::path& labels);

/// Label column selector for CSV input: empty means the last column.
struct LabelColumn {
  std::string name;
};

/// Rectangular CSV with a header row. Feature cells must be numeric; labels
/// are mapped to 0..C-1 in order of first appearance.
Dataset load_csv(const std::filesystem::path& path, const LabelColumn& label = {});

/// {"<class id>": "<original label>"} sidecar for CSV data.
void write_label_mapping(const Dataset& data, const std::filesystem::path& path);

/// Isotropic unit-variance Gaussian blobs. Centers are separation * N(0, I).
Dataset synth_blobs(std::size_t class_count, std::size_t per_class, std::size_t dim,
                    double separation, Rng& rng);

struct Standardization {
  Dataset data;
  std::vector<double> mean;
  std::vector<double> stddev;  // population convention (divide by n)
};

/// x' = (x - mean) / std per feature with statistics from `stat_rows`, applied
/// to every row. Features with zero std are left untouched.
Standardization standardize(const Dataset& data, std::span<const std::size_t> stat_rows);
Standardization standardize(const Dataset& data);

/// Designate a seeded holdout fraction of rows as the test split.
void assign_holdout_test(Dataset& data, double fraction, Rng& rng);

/// Keep every designated test row plus a uniform sample of `pool_size`
/// non-test rows (original order preserved). No-op if the pool is already
/// that small.
Dataset subsample_pool(const Dataset& data, std::size_t pool_size, Rng& rng);

}  // namespace mpts
