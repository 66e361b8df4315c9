#include "mpts/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include "mpts/acquisition.hpp"
#include "mpts/error.hpp"

namespace mpts {

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::mpts: return "mpts";
    case Method::random: return "random";
    case Method::entropy: return "entropy";
    case Method::bald: return "bald";
    case Method::coreset: return "coreset";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::mpts, Method::random, Method::entropy, Method::bald, Method::coreset}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected mpts, random, entropy, bald or coreset)");
}

void ExperimentConfig::validate() const {
  if (repeats < 1) throw ConfigError("/repeats: must be >= 1");
  if (rounds < 1) throw ConfigError("/rounds: must be >= 1");
  if (budget < 1) throw ConfigError("/budget: must be >= 1");
  if (initial_count < 1) throw ConfigError("/initial_count: must be >= 1");
  if (methods.empty()) throw ConfigError("/methods: must list at least one method");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = i + 1; j < methods.size(); ++j) {
      if (methods[i] == methods[j]) {
        throw ConfigError("/methods: '" + std::string(method_name(methods[i])) + "' listed twice");
      }
    }
  }
  try {
    train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("/train: ") + e.what());
  }
  if (!(dataset.test_fraction >= 0.0 && dataset.test_fraction < 1.0)) {
    throw ConfigError("/dataset/test_fraction: must be in [0, 1)");
  }
  if (dataset.kind == DatasetConfig::Kind::synthetic &&
      (dataset.classes < 1 || dataset.per_class < 1 || dataset.dim < 1)) {
    throw ConfigError("/dataset: synthetic counts must be >= 1");
  }
  if (dataset.kind == DatasetConfig::Kind::mnist &&
      (dataset.train_images.empty() || dataset.train_labels.empty() ||
       dataset.test_images.empty() || dataset.test_labels.empty())) {
    throw ConfigError("/dataset: mnist needs train_images, train_labels, test_images, test_labels");
  }
  if (dataset.kind == DatasetConfig::Kind::csv && dataset.path.empty()) {
    throw ConfigError("/dataset/path: required for csv data");
  }
  for (std::size_t h : model.hidden) {
    if (h == 0) throw ConfigError("/model/hidden: widths must be >= 1");
  }
  const std::size_t depth_hidden =
      model.hidden.empty() ? (dataset.kind == DatasetConfig::Kind::mnist ? 1 : 2)
                           : model.hidden.size();
  if (model.split_index > depth_hidden) {
    throw ConfigError("/model/split_index: must be <= number of hidden layers");
  }
  if (bald.passes < 2) throw ConfigError("/bald/passes: must be >= 2");
  if (!(bald.dropout > 0.0 && bald.dropout < 1.0)) {
    throw ConfigError("/bald/dropout: must be in (0, 1)");
  }
}

ModelSpec ExperimentConfig::model_spec(std::size_t input_dim, std::size_t classes,
                                       Method method) const {
  std::vector<std::size_t> hidden = model.hidden;
  if (hidden.empty()) {
    hidden = dataset.kind == DatasetConfig::Kind::mnist ? std::vector<std::size_t>{128}
                                                        : std::vector<std::size_t>{64, 64};
  }
  ModelSpec spec;
  spec.layer_sizes.push_back(input_dim);
  spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
  spec.layer_sizes.push_back(classes);
  spec.split_index = model.split_index == 0 ? hidden.size() : model.split_index;
  spec.dropout_rate = method == Method::bald ? bald.dropout : 0.0;
  return spec;
}

double accuracy(const Matrix& probs, std::span<const int> labels,
                std::span<const std::size_t> rows) {
  if (rows.empty()) throw StateError("evaluate: test set is empty");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto p = probs.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.size(); ++c) {
      if (p[c] > p[best]) best = c;
    }
    if (static_cast<int>(best) == labels[rows[i]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

double evaluate(const MlpParams& params, const PoolState& pool) {
  if (pool.test().empty()) throw StateError("evaluate: test set is empty");
  const Matrix x = gather_rows(pool.features(), pool.test());
  return accuracy(predict_proba(params, x), pool.labels(), pool.test());
}

double evaluate(const CheckpointSet& trajectory, const PoolState& pool) {
  if (pool.test().empty()) throw StateError("evaluate: test set is empty");
  const Matrix x = gather_rows(pool.features(), pool.test());
  return accuracy(avg_predict(trajectory, x), pool.labels(), pool.test());
}

Dataset load_dataset(const DatasetConfig& config, std::uint64_t master_seed) {
  switch (config.kind) {
    case DatasetConfig::Kind::mnist:
      return load_mnist_split(config.train_images, config.train_labels, config.test_images,
                              config.test_labels);
    case DatasetConfig::Kind::csv:
      return load_csv(config.path, LabelColumn{config.label_column});
    case DatasetConfig::Kind::synthetic: {
      Rng rng = Rng::derive(master_seed, "data", {0});
      return synth_blobs(config.classes, config.per_class, config.dim, config.separation, rng);
    }
  }
  throw ConfigError("unknown dataset kind");
}

std::vector<RoundLog> run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  return run_experiment(config, load_dataset(config.dataset, config.master_seed), options);
}

namespace {

struct RepeatSetup {
  std::uint64_t seed = 0;
  std::optional<PoolState> pool;
};

std::string cell_tag(Method m, std::size_t repeat, std::size_t round) {
  return std::string(method_name(m)) + "_rep" + std::to_string(repeat) + "_round" +
         std::to_string(round);
}

AcquisitionResult acquire(Method method, const ExperimentConfig& config, const TrainResult& tr,
                          const PoolState& pool, Rng& rng) {
  switch (method) {
    case Method::mpts: return mpts_acquire(tr.trajectory, pool, config.budget);
    case Method::random: return random_acquire(pool, config.budget, rng);
    case Method::entropy: return entropy_acquire(tr.final_params, pool, config.budget);
    case Method::bald:
      return bald_acquire(tr.final_params, pool, config.budget, config.bald.passes, rng);
    case Method::coreset: return coreset_acquire(tr.final_params, pool, config.budget);
  }
  throw ConfigError("unknown method");
}

std::vector<RoundLog> run_cell(const ExperimentConfig& config, Method method, std::size_t repeat,
                               const RepeatSetup& setup,
                               const std::function<void(const RoundLog&)>& report) {
  using clock = std::chrono::steady_clock;
  PoolState pool = *setup.pool;
  const ModelSpec spec =
      config.model_spec(pool.features().cols(), pool.class_count(), method);
  const std::filesystem::path out_dir = config.output_dir;
  std::vector<RoundLog> logs;
  for (std::size_t round = 0; round < config.rounds; ++round) {
    const auto t0 = clock::now();
    TrainConfig tc = config.train;
    tc.seed = Rng::derive_seed(setup.seed, "train", {round});
    if (method != Method::mpts) tc.lambda = 0.0;

    TrainResult tr;
    try {
      tr = train_round(pool, spec, tc);
    } catch (const DivergedError& e) {
      throw DivergedError(std::string(e.what()) + " (method " + std::string(method_name(method)) +
                              ", repeat " + std::to_string(repeat) + ", round " +
                              std::to_string(round) + ")",
                          e.step());
    }
    RoundLog log;
    log.method = std::string(method_name(method));
    log.repeat = repeat;
    log.round = round;
    log.labeled_count = pool.labeled().size();
    log.repeat_seed = setup.seed;
    log.test_accuracy =
        method == Method::mpts ? evaluate(tr.trajectory, pool) : evaluate(tr.final_params, pool);
    if (config.dump_history) {
      std::filesystem::create_directories(out_dir / "history");
      write_history_csv(tr.history, out_dir / "history" / (cell_tag(method, repeat, round) + ".csv"));
    }

    const bool last = round + 1 == config.rounds || pool.unlabeled().empty();
    if (!last) {
      Rng arng = Rng::derive(setup.seed, "acquire", {round, static_cast<std::uint64_t>(method)});
      AcquisitionResult ar = acquire(method, config, tr, pool, arng);
      if (config.dump_scores) {
        std::filesystem::create_directories(out_dir / "scores");
        write_scores_csv(ar, pool, out_dir / "scores" / (cell_tag(method, repeat, round) + ".csv"));
      }
      pool.label(ar.selected);
      pool.check_invariants();
    }
    if (config.record_wall_time) {
      log.wall_time_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    }
    logs.push_back(log);
    if (report) report(log);
    if (last) break;
  }
  return logs;
}

}  // namespace

std::vector<RoundLog> run_experiment(const ExperimentConfig& config, const Dataset& data,
                                     const RunOptions& options) {
  config.validate();
  data.validate();

  // Fixed across repeats: the test split and pool subsample.
  auto base = std::make_shared<Dataset>(data);
  if (!base->designated_test) {
    Rng split_rng = Rng::derive(config.master_seed, "data", {1});
    assign_holdout_test(*base, config.dataset.test_fraction, split_rng);
  }
  if (config.dataset.pool_size > 0) {
    Rng sub_rng = Rng::derive(config.master_seed, "data", {2});
    *base = subsample_pool(*base, config.dataset.pool_size, sub_rng);
  }

  std::shared_ptr<const Dataset> pool_standardized;
  std::vector<RepeatSetup> setups(config.repeats);
  for (std::size_t r = 0; r < config.repeats; ++r) {
    RepeatSetup& s = setups[r];
    s.seed = Rng::derive_seed(config.master_seed, "repeat", {r});
    Rng pool_rng = Rng::derive(s.seed, "pool");
    PoolState pool = init_pool(base, config.initial_count, TestSplit::designated(), pool_rng,
                               config.bias_classes);
    std::shared_ptr<const Dataset> ds;
    switch (config.dataset.standardize) {
      case DatasetConfig::Standardize::none:
        ds = base;
        break;
      case DatasetConfig::Standardize::pool:
        // Pool statistics do not depend on the repeat.
        if (!pool_standardized) {
          pool_standardized =
              std::make_shared<const Dataset>(standardize(*base, pool.training_pool()).data);
        }
        ds = pool_standardized;
        break;
      case DatasetConfig::Standardize::labeled:
        ds = std::make_shared<const Dataset>(standardize(*base, pool.labeled()).data);
        break;
    }
    s.pool.emplace(ds, pool.labeled(), pool.unlabeled(), pool.test());
  }

  struct Cell {
    Method method;
    std::size_t repeat;
  };
  std::vector<Cell> cells;
  for (Method m : config.methods) {
    for (std::size_t r = 0; r < config.repeats; ++r) cells.push_back({m, r});
  }
  std::vector<std::vector<RoundLog>> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::mutex report_mutex;
  auto report = [&](const RoundLog& log) {
    if (!options.progress) return;
    std::lock_guard lock(report_mutex);
    options.progress(log);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = run_cell(config, cells[i].method, cells[i].repeat, setups[cells[i].repeat],
                              report);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<RoundLog> logs;
  for (auto& r : results) logs.insert(logs.end(), r.begin(), r.end());
  std::stable_sort(logs.begin(), logs.end(), [](const RoundLog& a, const RoundLog& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.repeat != b.repeat) return a.repeat < b.repeat;
    return a.round < b.round;
  });
  return logs;
}

}  // namespace mpts
