#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace mpts {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,      // unexpected / I/O errors
  kExitConfig = 2,       // malformed config or invalid flag values
  kExitDataFormat = 3,   // dataset file could not be parsed
  kExitDiverged = 4,     // non-finite loss or gradient during training
  kExitGradcheck = 5,    // a gradient suite exceeded its tolerance
  kExitUsage = 64,       // bad command-line syntax
};

struct RunCommand {
  std::filesystem::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output_dir;
  std::size_t jobs = 1;
};

/// Run an experiment and write results.csv, results.json and
/// config.resolved.json into the output directory.
int cmd_run(const RunCommand& cmd, std::ostream& out, std::ostream& err);

int cmd_gradcheck(std::uint64_t seed, double inject, std::ostream& out, std::ostream& err);

/// Aggregate a results CSV into per-(method, round) mean and std accuracy.
int cmd_curves(const std::filesystem::path& results, const std::filesystem::path& output,
               std::ostream& out, std::ostream& err);

}  // namespace mpts
