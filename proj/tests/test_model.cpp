#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mpts/error.hpp"
#include "mpts/layers.hpp"
#include "mpts/model.hpp"
#include "mpts/trainer.hpp"
#include "oracles.hpp"

using mpts::Matrix;
using mpts::MlpParams;
using mpts::Rng;

namespace {

MlpParams zero_like(MlpParams p) {
  for (auto& l : p.layers) {
    for (double& v : l.w.data()) v = 0.0;
    for (double& v : l.b) v = 0.0;
  }
  return p;
}

}  // namespace

TEST_CASE("init_mlp") {
  Rng r1(9), r2(9);
  const mpts::ModelSpec spec{{784, 128, 10}, 1, 0.0};
  const MlpParams a = mpts::init_mlp(spec, r1);
  CHECK(a == mpts::init_mlp(spec, r2));
  CHECK(a.layers.size() == 2);
  CHECK(a.feature_dim() == 128);
  CHECK(a.class_count() == 10);
  CHECK(a.input_dim() == 784);

  Rng r3(10);
  const MlpParams big = mpts::init_mlp({{1000, 1000, 2}, 1, 0.0}, r3);
  double sum = 0, sq = 0;
  for (double v : big.layers[0].w.data()) {
    sum += v;
    sq += v * v;
  }
  const double n = 1e6, mean = sum / n, var = sq / n - mean * mean;
  CHECK(std::abs(var / (2.0 / 1000) - 1.0) <= 0.1);
  for (double v : big.layers[0].b) CHECK(v == 0.0);

  CHECK_THROWS_AS(mpts::init_mlp({{4, 3}, 1, 0.0}, r3), mpts::ParameterError);
  CHECK_THROWS_AS(mpts::init_mlp({{4, 8, 3}, 2, 0.0}, r3), mpts::ParameterError);
}

TEST_CASE("forward shapes and eval determinism") {
  Rng rng(11);
  const MlpParams p = mpts::init_mlp({{5, 7, 6, 3}, 2, 0.5}, rng);
  const Matrix x = oracle::random_matrix(4, 5, rng);
  Rng unused(0);
  const auto f1 = mpts::forward(p, x, false, unused);
  const auto f2 = mpts::forward(p, x, false, unused);
  CHECK(f1.features.rows() == 4);
  CHECK(f1.features.cols() == 6);
  CHECK(f1.logits.cols() == 3);
  CHECK(f1.logits == f2.logits);
  CHECK(mpts::extract_features(p, x) == f1.features);
  for (double v : f1.features.data()) CHECK(v >= 0.0);
  CHECK(oracle::max_abs_diff(mpts::predict_proba(p, x), mpts::softmax(f1.logits)) <= 1e-15);
  CHECK_THROWS_AS(mpts::forward(p, Matrix(2, 4), false, unused), mpts::DimensionError);
}

TEST_CASE("zero network is uniform") {
  Rng rng(12);
  const MlpParams p = zero_like(mpts::init_mlp({{3, 5, 4}, 1, 0.0}, rng));
  const Matrix probs = mpts::predict_proba(p, oracle::random_matrix(6, 3, rng));
  for (double v : probs.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(oracle::entropy({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("network gradient matches finite differences") {
  Rng rng(13);
  const MlpParams p = mpts::init_mlp({{4, 8, 6, 3}, 2, 0.0}, rng);
  const Matrix x = oracle::random_matrix(5, 4, rng);
  const std::vector<int> y{0, 1, 2, 1, 0};
  const Matrix c = oracle::random_matrix(5, 6, rng);  // linear probe on features

  auto loss = [&](const MlpParams& q) {
    Rng none(0);
    const auto f = mpts::forward(q, x, false, none);
    double s = mpts::softmax_cross_entropy(f.logits, y).loss;
    for (std::size_t i = 0; i < c.size(); ++i) s += c.data()[i] * f.features.data()[i];
    return s;
  };
  Rng none(0);
  const auto f = mpts::forward(p, x, false, none);
  const auto ce = mpts::softmax_cross_entropy(f.logits, y);
  const auto g = mpts::backward(p, f.cache, &ce.dlogits, &c);

  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const Matrix num = oracle::numeric_grad(p.layers[l].w, [&](const Matrix& w) {
      MlpParams q = p;
      q.layers[l].w = w;
      return loss(q);
    });
    CHECK(oracle::rel_err(g[l].w, num) <= 1e-5);
  }
}

TEST_CASE("snapshots are isolated") {
  Rng rng(14);
  MlpParams p = mpts::init_mlp({{3, 6, 2}, 1, 0.0}, rng);
  const Matrix x = oracle::random_matrix(8, 3, rng);
  const std::vector<int> y{0, 1, 0, 1, 1, 0, 0, 1};
  const Matrix before = mpts::predict_proba(p, x);
  const auto snap = mpts::snapshot(p);
  CHECK(mpts::predict_proba(snap.restore(), x) == before);

  std::vector<mpts::ParamSnapshot> history{snap};
  for (int step = 0; step < 10; ++step) {
    Rng none(0);
    const auto f = mpts::forward(p, x, true, none);
    const auto ce = mpts::softmax_cross_entropy(f.logits, y);
    mpts::sgd_step(p, mpts::backward(p, f.cache, &ce.dlogits, nullptr), 0.1, 0.0);
    history.push_back(mpts::snapshot(p));
  }
  CHECK(mpts::predict_proba(snap.restore(), x) == before);
  CHECK(mpts::predict_proba(p, x) != before);
  for (std::size_t i = 1; i < history.size(); ++i)
    CHECK(history[i].params() != history[i - 1].params());
}

TEST_CASE("checkpoint file round trip") {
  Rng rng(15);
  const MlpParams p = mpts::init_mlp({{4, 5, 3}, 1, 0.0}, rng);
  const auto dir = std::filesystem::temp_directory_path() / "mpts_model_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "params.bin";
  mpts::save_params(p, path);
  CHECK(mpts::load_params(path, 1) == p);

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 3);
  CHECK_THROWS_AS(mpts::load_params(path, 1), mpts::FormatError);
  mpts::save_params(p, path);
  {
    std::ofstream os(path, std::ios::app | std::ios::binary);
    os.put('x');
  }
  CHECK_THROWS_AS(mpts::load_params(path, 1), mpts::FormatError);
  std::filesystem::remove_all(dir);
}
