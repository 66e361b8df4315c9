#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mpts/experiment.hpp"

namespace mpts {

/// Header: method,repeat,round,labeled_count,accuracy,wall_time_s
void write_results_csv(const std::vector<RoundLog>& logs, const std::filesystem::path& path);

/// {"config": {...}, "rounds": [...]} with the resolved config embedded.
void write_results_json(const std::vector<RoundLog>& logs, const ExperimentConfig& config,
                        const std::filesystem::path& path);

/// Parse a results CSV written by write_results_csv (FormatError otherwise).
std::vector<RoundLog> read_results_csv(const std::filesystem::path& path);

struct CurvePoint {
  std::string method;
  std::size_t round = 0;
  std::size_t labeled_count = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample std over repeats; 0 for a single repeat
  std::size_t repeats = 0;
};

/// Mean and spread of accuracy per (method, round), sorted by method then round.
std::vector<CurvePoint> accuracy_curves(const std::vector<RoundLog>& logs);

/// Header: method,round,labeled_count,mean_accuracy,std_accuracy,repeats
void write_curves_csv(const std::vector<CurvePoint>& curves, const std::filesystem::path& path);

}  // namespace mpts
