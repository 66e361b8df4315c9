#include "mpts/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "mpts/config.hpp"
#include "mpts/error.hpp"
#include "mpts/experiment.hpp"
#include "mpts/gradcheck.hpp"
#include "mpts/results.hpp"

namespace mpts {

namespace {

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "data format error: " << e.what() << '\n';
    return kExitDataFormat;
  } catch (const DivergedError& e) {
    err << "training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int cmd_run(const RunCommand& cmd, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig config = parse_config(cmd.config_path);
    if (cmd.seed) config.master_seed = *cmd.seed;
    if (cmd.output_dir) config.output_dir = cmd.output_dir->string();
    if (cmd.jobs == 0) throw ConfigError("--jobs must be >= 1");

    const std::filesystem::path dir = config.output_dir;
    std::filesystem::create_directories(dir);
    {
      std::ofstream os(dir / "config.resolved.json");
      os << config_to_json(config) << '\n';
    }

    RunOptions opts;
    opts.jobs = cmd.jobs;
    opts.progress = [&out](const RoundLog& l) {
      char line[160];
      std::snprintf(line, sizeof line, "[%s] repeat %zu round %zu labeled %zu accuracy %.4f\n",
                    l.method.c_str(), l.repeat, l.round, l.labeled_count, l.test_accuracy);
      out << line << std::flush;
    };
    const Dataset data = load_dataset(config.dataset, config.master_seed);
    if (config.dataset.kind == DatasetConfig::Kind::csv) {
      write_label_mapping(data, dir / "label_mapping.json");
    }
    const auto logs = run_experiment(config, data, opts);
    write_results_csv(logs, dir / "results.csv");
    write_results_json(logs, config, dir / "results.json");
    out << "wrote " << logs.size() << " rows to " << (dir / "results.csv").string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_gradcheck(std::uint64_t seed, double inject, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    bool ok = true;
    for (const GradcheckSuite& s : run_gradcheck(seed, inject)) {
      char line[200];
      std::snprintf(line, sizeof line, "%-52s instances %3zu  max rel err %.3e  %s\n",
                    s.name.c_str(), s.instances, s.max_rel_error, s.passed ? "ok" : "FAIL");
      out << line;
      if (!s.passed) {
        err << "gradcheck failed: " << s.name << '\n';
        ok = false;
      }
    }
    return static_cast<int>(ok ? kExitOk : kExitGradcheck);
  });
}

int cmd_curves(const std::filesystem::path& results, const std::filesystem::path& output,
               std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto curves = accuracy_curves(read_results_csv(results));
    write_curves_csv(curves, output);
    out << "wrote " << curves.size() << " curve points to " << output.string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

}  // namespace mpts
