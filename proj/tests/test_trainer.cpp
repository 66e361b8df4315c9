#include <cmath>
#include <memory>
#include <numeric>
#include <set>

#include "doctest.h"
#include "mpts/dataio.hpp"
#include "mpts/error.hpp"
#include "mpts/layers.hpp"
#include "mpts/pool.hpp"
#include "mpts/trainer.hpp"
#include "oracles.hpp"

using mpts::Matrix;
using mpts::MlpParams;
using mpts::Rng;
using mpts::TrainConfig;

namespace {

mpts::PoolState blob_pool(std::uint64_t seed, std::size_t classes, std::size_t per_class,
                          std::size_t dim, double sep, std::size_t labeled_count) {
  Rng rng(seed);
  auto data = std::make_shared<mpts::Dataset>(mpts::synth_blobs(classes, per_class, dim, sep, rng));
  return mpts::init_pool(data, labeled_count, mpts::TestSplit::holdout(0.2), rng);
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 10;
  c.n_checkpoints = 2;
  c.batch_size = 16;
  c.base_lr = 0.05;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("cyclic learning rate") {
  TrainConfig c;
  c.epochs = 4;
  c.n_checkpoints = 2;
  c.base_lr = 1e-3;
  c.lr_floor_ratio = 0.1;
  const std::size_t spe = 10;
  for (std::size_t s = 0; s < 20; ++s) CHECK(mpts::cyclic_lr(s, spe, c) == 1e-3);
  for (std::size_t cycle = 0; cycle < 2; ++cycle) {
    for (std::size_t pos = 0; pos < 10; ++pos) {
      const double want = 1e-3 - (1e-3 - 1e-4) * static_cast<double>(pos) / 9.0;
      CHECK(mpts::cyclic_lr(20 + 10 * cycle + pos, spe, c) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  const auto ck = mpts::checkpoint_steps(spe, c);
  CHECK(ck == std::vector<std::size_t>{29, 39});
  for (std::size_t s : ck) CHECK(std::abs(mpts::cyclic_lr(s, spe, c) - 1e-4) <= 1e-12);

  TrainConfig d;  // 100 epochs, 5 checkpoints
  for (std::size_t s : {1u, 3u, 7u}) {
    const auto steps = mpts::checkpoint_steps(s, d);
    REQUIRE(steps.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(steps[i] == 50 * s + 10 * s * (i + 1) - 1);
      CHECK(std::abs(mpts::cyclic_lr(steps[i], s, d) - 1e-4) <= 1e-12);
    }
  }
  // Uneven split: 3 cyclic steps into 2 cycles, boundaries at floor(i*3/2).
  TrainConfig u;
  u.epochs = 6;
  u.n_checkpoints = 2;
  CHECK(mpts::checkpoint_steps(1, u) == std::vector<std::size_t>{3, 5});
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.epochs = 7;
  CHECK_THROWS_AS(c.validate(), mpts::ConfigError);
  c = TrainConfig{};
  c.base_lr = 0;
  CHECK_THROWS_AS(c.validate(), mpts::ConfigError);
  c = TrainConfig{};
  c.lambda = -1;
  CHECK_THROWS_AS(c.validate(), mpts::ConfigError);
  CHECK(mpts::steps_per_epoch(100, 64) == 2);
  CHECK(mpts::steps_per_epoch(128, 64) == 2);
  CHECK(mpts::steps_per_epoch(129, 64) == 3);
}

TEST_CASE("sgd step") {
  MlpParams p;
  p.layers.push_back({Matrix::from_rows({{1.0}}), {1.0}});
  MlpParams q = p;
  mpts::MlpGrads g{{Matrix::from_rows({{2.0}}), {2.0}}};
  mpts::sgd_step(q, g, 0.0, 0.3);
  CHECK(q == p);
  mpts::sgd_step(q, g, 0.1, 0.0);
  CHECK(q.layers[0].w(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(q.layers[0].b[0] == doctest::Approx(0.8).epsilon(1e-15));

  MlpParams r = p;
  mpts::sgd_step(r, mpts::zero_grads_like(r), 0.1, 0.5);
  CHECK(r.layers[0].w(0, 0) == doctest::Approx(0.95).epsilon(1e-15));

  g[0].w(0, 0) = NAN;
  CHECK_THROWS_AS(mpts::sgd_step(r, g, 0.1, 0.0, 17), mpts::DivergedError);
  try {
    mpts::sgd_step(r, g, 0.1, 0.0, 17);
  } catch (const mpts::DivergedError& e) {
    CHECK(e.step() == 17);
  }
}

TEST_CASE("batch sampling") {
  Rng rng(1);
  const std::vector<std::size_t> from{3, 5, 8, 13, 21};
  const auto b = mpts::sample_batch(rng, from, 5);
  CHECK(std::set<std::size_t>(b.begin(), b.end()).size() == 5);
  const auto w = mpts::sample_batch(rng, from, 12);
  CHECK(w.size() == 12);
  for (std::size_t v : w) CHECK(std::find(from.begin(), from.end(), v) != from.end());
  CHECK_THROWS_AS(mpts::sample_batch(rng, std::vector<std::size_t>{}, 2), mpts::StateError);
}

TEST_CASE("snapshots land on cycle ends") {
  const auto pool = blob_pool(2, 3, 40, 4, 4.0, 30);
  TrainConfig c = small_config();
  c.epochs = 100;
  c.n_checkpoints = 5;
  const auto r = mpts::train_round(pool, {{4, 8, 3}, 1, 0.0}, c);
  CHECK(r.trajectory.size() == 5);
  CHECK(r.history.size() == 100);
  const std::size_t spe = mpts::steps_per_epoch(30, 16);
  CHECK(r.snapshot_steps == mpts::checkpoint_steps(spe, c));
  CHECK(r.trajectory[4].params() == r.final_params);
  for (std::size_t i = 1; i < 5; ++i) CHECK(r.trajectory[i].params() != r.trajectory[i - 1].params());
}

namespace {

// Plain CE training that follows the trainer's documented stream contract.
MlpParams ce_reference(const mpts::PoolState& pool, const mpts::ModelSpec& spec,
                       const TrainConfig& c) {
  Rng init = Rng::derive(c.seed, "init");
  Rng batch = Rng::derive(c.seed, "batch");
  Rng drop = Rng::derive(c.seed, "dropout");
  MlpParams p = mpts::init_mlp(spec, init);
  const auto tp = pool.training_pool();
  const std::size_t spe = mpts::steps_per_epoch(pool.labeled().size(), c.batch_size);
  for (std::size_t step = 0; step < c.epochs * spe; ++step) {
    const auto bl = mpts::sample_batch(batch, pool.labeled(), c.batch_size);
    const auto bp = mpts::sample_batch(batch, tp, c.batch_size);
    std::vector<int> y;
    for (std::size_t i : bl) y.push_back(pool.labels()[i]);
    const auto fl = mpts::forward(p, mpts::gather_rows(pool.features(), bl), true, drop);
    mpts::forward(p, mpts::gather_rows(pool.features(), bp), true, drop);  // stream parity
    const auto ce = mpts::softmax_cross_entropy(fl.logits, y);
    mpts::sgd_step(p, mpts::backward(p, fl.cache, &ce.dlogits, nullptr),
                   mpts::cyclic_lr(step, spe, c), c.weight_decay, step);
  }
  return p;
}

}  // namespace

TEST_CASE("lambda zero equals plain cross-entropy training") {
  const auto pool = blob_pool(3, 3, 40, 4, 3.0, 25);
  for (double rate : {0.0, 0.3}) {
    const mpts::ModelSpec spec{{4, 8, 6, 3}, 1, rate};
    TrainConfig c = small_config();
    c.lambda = 0.0;
    const auto r = mpts::train_round(pool, spec, c);
    CHECK(r.final_params == ce_reference(pool, spec, c));
    double mmd_logged = 0;
    for (const auto& h : r.history) mmd_logged += h.mean_mmd2;
    CHECK(mmd_logged > 0.0);

    c.lambda = 0.5;
    CHECK(mpts::train_round(pool, spec, c).final_params != r.final_params);
  }
}

TEST_CASE("regularized training reduces both terms") {
  // Two separable blobs; the labeled set holds only the upper half of each
  // blob along one axis, so labeled and pool features start out shifted.
  double ce_first = 0, ce_last = 0, mmd_first = 0, mmd_last = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    auto data = std::make_shared<mpts::Dataset>(mpts::synth_blobs(2, 200, 4, 5.0, rng));
    std::vector<double> mean(2, 0.0);
    for (std::size_t i = 0; i < data->size(); ++i) mean[data->labels[i]] += data->features(i, 1) / 200;
    std::vector<std::size_t> labeled, unlabeled;
    for (std::size_t i = 0; i < data->size(); ++i) {
      const bool upper = data->features(i, 1) > mean[data->labels[i]];
      if (upper && labeled.size() < 60 && i % 2 == 0) labeled.push_back(i);
      else unlabeled.push_back(i);
    }
    const mpts::PoolState pool(data, labeled, unlabeled, {});
    TrainConfig c;
    c.epochs = 20;
    c.n_checkpoints = 2;
    c.batch_size = 16;
    c.base_lr = 0.05;
    c.lambda = 0.1;
    c.seed = seed;
    const mpts::ModelSpec spec{{4, 16, 2}, 1, 0.0};
    const auto r = mpts::train_round(pool, spec, c);
    CAPTURE(seed);
    CHECK(r.history.back().mean_ce < r.history.front().mean_ce);
    ce_first += r.history.front().mean_ce;
    ce_last += r.history.back().mean_ce;
    mmd_first += r.history.front().mean_mmd2;
    mmd_last += r.history.back().mean_mmd2;

    // Same seed without the penalty ends with a larger discrepancy.
    c.lambda = 0.0;
    CHECK(r.history.back().mean_mmd2 < mpts::train_round(pool, spec, c).history.back().mean_mmd2);
  }
  CHECK(ce_last < ce_first);
  CHECK(mmd_last < mmd_first);
}

TEST_CASE("train_round is deterministic and validates input") {
  const auto pool = blob_pool(4, 3, 30, 4, 3.0, 20);
  const TrainConfig c = small_config();
  const mpts::ModelSpec spec{{4, 8, 3}, 1, 0.0};
  CHECK(mpts::train_round(pool, spec, c).final_params == mpts::train_round(pool, spec, c).final_params);
  CHECK_THROWS_AS(mpts::train_round(pool, {{5, 8, 3}, 1, 0.0}, c), mpts::DimensionError);
  TrainConfig bad = c;
  bad.epochs = 3;
  CHECK_THROWS_AS(mpts::train_round(pool, spec, bad), mpts::ConfigError);

  TrainConfig fixed = c;
  fixed.kernel.bandwidths = {0.5, 2.0};
  CHECK(mpts::train_round(pool, spec, fixed).kernel.bandwidths() == std::vector<double>{0.5, 2.0});
  TrainConfig multi = c;
  multi.kernel.multi_scale = true;
  CHECK(mpts::train_round(pool, spec, multi).kernel.bandwidths().size() == 3);
}

TEST_CASE("objective gradient includes both batches") {
  Rng rng(6);
  const MlpParams p = mpts::init_mlp({{3, 6, 2}, 1, 0.0}, rng);
  const Matrix xl = oracle::random_matrix(4, 3, rng), xp = oracle::random_matrix(5, 3, rng, 2.0);
  const std::vector<int> y{0, 1, 1, 0};
  const mpts::KernelSpec k(1.0);
  Rng d(0);
  const auto obj = mpts::objective(p, xl, y, xp, 0.7, k, d);
  const Matrix num = oracle::numeric_grad(p.layers[0].w, [&](const Matrix& w) {
    MlpParams q = p;
    q.layers[0].w = w;
    Rng dd(0);
    const auto o = mpts::objective(q, xl, y, xp, 0.7, k, dd);
    return o.ce + 0.7 * o.mmd2;
  });
  CHECK(oracle::rel_err(obj.grads[0].w, num) <= 1e-5);
}

TEST_CASE("a small sgd step lowers the loss") {
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    MlpParams p = mpts::init_mlp({{3, 6, 3}, 1, 0.0}, rng);
    const Matrix x = oracle::random_matrix(8, 3, rng);
    const std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1};
    Rng none(0);
    const auto f = mpts::forward(p, x, false, none);
    const auto ce = mpts::softmax_cross_entropy(f.logits, y);
    mpts::sgd_step(p, mpts::backward(p, f.cache, &ce.dlogits, nullptr), 1e-4, 0.0);
    CHECK(mpts::softmax_cross_entropy(mpts::forward(p, x, false, none).logits, y).loss < ce.loss);
  }
}
