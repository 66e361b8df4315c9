#include "mpts/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include "mpts/error.hpp"
#include "mpts/layers.hpp"
#include "mpts/pool.hpp"

namespace mpts {

void TrainConfig::validate() const {
  if (n_checkpoints < 1) throw ConfigError("n_checkpoints must be >= 1");
  if (epochs % 2 != 0 || epochs < 2 * n_checkpoints) {
    throw ConfigError("epochs (" + std::to_string(epochs) +
                      ") must be even and >= 2 * n_checkpoints (" +
                      std::to_string(n_checkpoints) + ")");
  }
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("base_lr must be > 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("weight_decay must be >= 0");
  }
  if (!(lr_floor_ratio >= 0.0 && lr_floor_ratio <= 1.0)) {
    throw ConfigError("lr_floor_ratio must be in [0, 1]");
  }
  for (double s : kernel.bandwidths) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("kernel bandwidths must be > 0");
  }
}

std::size_t steps_per_epoch(std::size_t labeled_count, std::size_t batch_size) {
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  const std::size_t s = (labeled_count + batch_size - 1) / batch_size;
  return s == 0 ? 1 : s;
}

namespace {

struct Cycles {
  std::size_t half = 0;   // first step of the cyclic phase
  std::size_t span = 0;   // number of cyclic steps
  std::size_t n = 1;

  std::size_t start(std::size_t i) const { return span * i / n; }
};

Cycles cycles_for(std::size_t spe, const TrainConfig& c) {
  return {c.epochs / 2 * spe, (c.epochs - c.epochs / 2) * spe, c.n_checkpoints};
}

}  // namespace

double cyclic_lr(std::size_t step, std::size_t spe, const TrainConfig& config) {
  const Cycles cyc = cycles_for(spe, config);
  if (step < cyc.half) return config.base_lr;
  const std::size_t t = step - cyc.half;
  const double floor_lr = config.base_lr * config.lr_floor_ratio;
  if (t >= cyc.span) return floor_lr;
  std::size_t i = t * cyc.n / cyc.span;
  // Integer division can land one cycle off at the boundaries; correct it.
  while (i + 1 < cyc.n && cyc.start(i + 1) <= t) ++i;
  while (i > 0 && cyc.start(i) > t) --i;
  const std::size_t len = cyc.start(i + 1) - cyc.start(i);
  const std::size_t pos = t - cyc.start(i);
  if (len <= 1) return floor_lr;
  const double frac = static_cast<double>(pos) / static_cast<double>(len - 1);
  return config.base_lr * (1.0 - (1.0 - config.lr_floor_ratio) * frac);
}

std::vector<std::size_t> checkpoint_steps(std::size_t spe, const TrainConfig& config) {
  const Cycles cyc = cycles_for(spe, config);
  std::vector<std::size_t> steps;
  for (std::size_t i = 0; i < cyc.n; ++i) steps.push_back(cyc.half + cyc.start(i + 1) - 1);
  return steps;
}

std::vector<std::size_t> sample_batch(Rng& rng, std::span<const std::size_t> from,
                                      std::size_t batch_size) {
  if (from.empty()) throw StateError("cannot sample a batch from an empty set");
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  if (from.size() < batch_size) {
    for (std::size_t i = 0; i < batch_size; ++i) out.push_back(from[rng.below(from.size())]);
    return out;
  }
  // Partial Fisher-Yates over a scratch copy.
  std::vector<std::size_t> scratch(from.begin(), from.end());
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = i + rng.below(scratch.size() - i);
    std::swap(scratch[i], scratch[j]);
    out.push_back(scratch[i]);
  }
  return out;
}

void sgd_step(MlpParams& params, const MlpGrads& grads, double lr, double weight_decay,
              std::size_t step) {
  if (grads.size() != params.layers.size()) {
    throw DimensionError("sgd_step: " + std::to_string(grads.size()) + " gradient layers for " +
                         std::to_string(params.layers.size()) + " parameter layers");
  }
  for (std::size_t l = 0; l < grads.size(); ++l) {
    const Layer& g = grads[l];
    const Layer& p = params.layers[l];
    if (g.w.rows() != p.w.rows() || g.w.cols() != p.w.cols() || g.b.size() != p.b.size()) {
      throw DimensionError("sgd_step: gradient shape mismatch at layer " + std::to_string(l));
    }
    bool finite = g.w.all_finite();
    for (double v : g.b) finite = finite && std::isfinite(v);
    if (!finite) {
      throw DivergedError("non-finite gradient in layer " + std::to_string(l) + " at step " +
                              std::to_string(step),
                          step);
    }
  }
  for (std::size_t l = 0; l < grads.size(); ++l) {
    auto w = params.layers[l].w.data();
    const auto gw = grads[l].w.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * (gw[i] + weight_decay * w[i]);
    auto& b = params.layers[l].b;
    const auto& gb = grads[l].b;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * (gb[i] + weight_decay * b[i]);
  }
}

namespace {

void add_into(MlpGrads& acc, const MlpGrads& g) {
  for (std::size_t l = 0; l < acc.size(); ++l) {
    auto a = acc[l].w.data();
    const auto b = g[l].w.data();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    for (std::size_t i = 0; i < acc[l].b.size(); ++i) acc[l].b[i] += g[l].b[i];
  }
}

void scale(Matrix& m, double s) {
  for (double& v : m.data()) v *= s;
}

}  // namespace

Objective objective(const MlpParams& params, const Matrix& x_labeled,
                    std::span<const int> y_labeled, const Matrix& x_pool, double lambda,
                    const KernelSpec& kernel, Rng& dropout_rng) {
  ForwardResult fl = forward(params, x_labeled, true, dropout_rng);
  ForwardResult fp = forward(params, x_pool, true, dropout_rng);
  CrossEntropy ce = softmax_cross_entropy(fl.logits, y_labeled);

  Objective obj;
  obj.ce = ce.loss;
  obj.mmd2 = mmd2_biased(fl.features, fp.features, kernel);
  if (lambda == 0.0) {
    obj.grads = backward(params, fl.cache, &ce.dlogits, nullptr);
    return obj;
  }
  MmdGrads mg = mmd2_grad(fl.features, fp.features, kernel);
  scale(mg.dza, lambda);
  scale(mg.dzb, lambda);
  obj.grads = backward(params, fl.cache, &ce.dlogits, &mg.dza);
  add_into(obj.grads, backward(params, fp.cache, nullptr, &mg.dzb));
  return obj;
}

CheckpointSet::CheckpointSet(std::vector<ParamSnapshot> snapshots)
    : snapshots_(std::move(snapshots)) {
  for (const auto& s : snapshots_) {
    if (s.params().layers.size() != snapshots_.front().params().layers.size()) {
      throw ParameterError("checkpoint set mixes network structures");
    }
  }
}

void CheckpointSet::push_back(ParamSnapshot s) {
  if (!snapshots_.empty() &&
      s.params().layers.size() != snapshots_.front().params().layers.size()) {
    throw ParameterError("checkpoint set mixes network structures");
  }
  snapshots_.push_back(std::move(s));
}

TrainResult train_round(const PoolState& pool, const ModelSpec& model,
                        const TrainConfig& config) {
  config.validate();
  if (pool.labeled().empty()) throw StateError("train_round: labeled set is empty");
  if (model.layer_sizes.empty() || model.layer_sizes.front() != pool.features().cols() ||
      model.layer_sizes.back() != pool.class_count()) {
    throw DimensionError("train_round: model sizes do not match data (" +
                         std::to_string(pool.features().cols()) + " features, " +
                         std::to_string(pool.class_count()) + " classes)");
  }

  Rng init_rng = Rng::derive(config.seed, "init");
  Rng batch_rng = Rng::derive(config.seed, "batch");
  Rng dropout_rng = Rng::derive(config.seed, "dropout");

  TrainResult result;
  MlpParams params = init_mlp(model, init_rng);
  const std::vector<std::size_t>& labeled = pool.labeled();
  const std::vector<std::size_t> train_pool = pool.training_pool();
  const std::size_t spe = steps_per_epoch(labeled.size(), config.batch_size);
  result.snapshot_steps = checkpoint_steps(spe, config);

  std::optional<KernelSpec> kernel;
  if (!config.kernel.bandwidths.empty()) kernel.emplace(config.kernel.bandwidths);

  std::vector<int> y(config.batch_size);
  std::size_t next_ckpt = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t s = 0; s < spe; ++s) {
      const std::size_t step = epoch * spe + s;
      const auto bl = sample_batch(batch_rng, labeled, config.batch_size);
      const auto bp = sample_batch(batch_rng, train_pool, config.batch_size);
      const Matrix xl = gather_rows(pool.features(), bl);
      const Matrix xp = gather_rows(pool.features(), bp);
      for (std::size_t i = 0; i < bl.size(); ++i) y[i] = pool.labels()[bl[i]];

      if (!kernel) {
        // Bandwidth frozen for the round: eval-mode features of the first pool batch.
        const double sigma = median_heuristic(extract_features(params, xp));
        kernel = config.kernel.multi_scale ? KernelSpec::multi_scale(sigma) : KernelSpec(sigma);
      }

      Objective obj = objective(params, xl, y, xp, config.lambda, *kernel, dropout_rng);
      const double loss = obj.ce + config.lambda * obj.mmd2;
      if (!std::isfinite(loss)) {
        throw DivergedError("non-finite loss at step " + std::to_string(step), step);
      }
      const double lr = cyclic_lr(step, spe, config);
      sgd_step(params, obj.grads, lr, config.weight_decay, step);

      stats.mean_ce += obj.ce;
      stats.mean_mmd2 += obj.mmd2;
      stats.lr = lr;
      if (next_ckpt < result.snapshot_steps.size() && step == result.snapshot_steps[next_ckpt]) {
        result.trajectory.push_back(snapshot(params));
        ++next_ckpt;
      }
    }
    stats.mean_ce /= static_cast<double>(spe);
    stats.mean_mmd2 /= static_cast<double>(spe);
    result.history.push_back(stats);
  }
  result.final_params = std::move(params);
  result.kernel = *kernel;
  return result;
}

void write_history_csv(const std::vector<EpochStats>& history,
                       const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw StateError("cannot open " + path.string() + " for writing");
  os << "epoch,mean_ce,mean_mmd2,lr\n";
  char line[160];
  for (const auto& h : history) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", h.epoch, h.mean_ce, h.mean_mmd2,
                  h.lr);
    os << line;
  }
}

}  // namespace mpts
