#include "mpts/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "mpts/error.hpp"
#include "mpts/layers.hpp"
#include "mpts/pool.hpp"

namespace mpts {

namespace {

// Mean anchored at the first element: exact when all inputs are identical.
Matrix anchored_mean(std::span<const Matrix> ms) {
  Matrix mean = ms[0];
  const double inv = 1.0 / static_cast<double>(ms.size());
  auto out = mean.data();
  for (std::size_t t = 1; t < ms.size(); ++t) {
    if (ms[t].rows() != mean.rows() || ms[t].cols() != mean.cols()) {
      throw DimensionError("cannot average " + ms[t].shape_str() + " with " + mean.shape_str());
    }
    const auto a = ms[t].data();
    const auto base = ms[0].data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (a[i] - base[i]) * inv;
  }
  return mean;
}

double row_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

void require_unlabeled(const PoolState& pool, std::size_t budget, const char* method) {
  if (pool.unlabeled().empty()) {
    throw StateError(std::string(method) + ": unlabeled pool is empty");
  }
  if (budget == 0) throw ParameterError(std::string(method) + ": budget must be >= 1");
}

AcquisitionResult top_k_result(std::string method, std::vector<double> scores,
                               const PoolState& pool, std::size_t budget) {
  AcquisitionResult r;
  r.method = std::move(method);
  for (std::size_t pos : select_top_k(scores, budget)) r.selected.push_back(pool.unlabeled()[pos]);
  r.scores = std::move(scores);
  return r;
}

}  // namespace

Matrix avg_predict(const CheckpointSet& trajectory, const Matrix& x) {
  if (trajectory.empty()) throw ParameterError("avg_predict: empty trajectory");
  std::vector<Matrix> probs;
  probs.reserve(trajectory.size());
  for (const ParamSnapshot& s : trajectory) probs.push_back(predict_proba(s.params(), x));
  return anchored_mean(probs);
}

std::vector<double> entropy_scores(const Matrix& probs) {
  std::vector<double> h(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto p = probs.row(i);
    double s = 0.0;
    for (double v : p) s += v;
    if (std::abs(s - 1.0) > 1e-6) {
      throw ContractError("entropy_scores: row " + std::to_string(i) + " sums to " +
                          std::to_string(s));
    }
    h[i] = row_entropy(p);
  }
  return h;
}

std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k) {
  if (k == 0) throw ParameterError("select_top_k: k must be >= 1");
  k = std::min(k, scores.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    better);
  order.resize(k);
  return order;
}

AcquisitionResult mpts_acquire(const CheckpointSet& trajectory, const PoolState& pool,
                               std::size_t budget) {
  require_unlabeled(pool, budget, "mpts_acquire");
  const Matrix x = gather_rows(pool.features(), pool.unlabeled());
  return top_k_result("mpts", entropy_scores(avg_predict(trajectory, x)), pool, budget);
}

AcquisitionResult random_acquire(const PoolState& pool, std::size_t budget, Rng& rng) {
  require_unlabeled(pool, budget, "random_acquire");
  std::vector<std::size_t> idx = pool.unlabeled();
  const std::size_t k = std::min(budget, idx.size());
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(k);
  return {"random", {}, std::move(idx)};
}

AcquisitionResult entropy_acquire(const MlpParams& params, const PoolState& pool,
                                  std::size_t budget) {
  require_unlabeled(pool, budget, "entropy_acquire");
  const Matrix x = gather_rows(pool.features(), pool.unlabeled());
  return top_k_result("entropy", entropy_scores(predict_proba(params, x)), pool, budget);
}

std::vector<Matrix> mc_dropout_probs(const MlpParams& params, const Matrix& x,
                                     std::size_t passes, Rng& rng) {
  std::vector<Matrix> out;
  out.reserve(passes);
  for (std::size_t t = 0; t < passes; ++t) {
    out.push_back(softmax(forward(params, x, true, rng).logits));
  }
  return out;
}

std::vector<double> bald_scores(std::span<const Matrix> pass_probs) {
  if (pass_probs.empty()) throw ParameterError("bald_scores: no passes");
  const Matrix mean = anchored_mean(pass_probs);
  const double inv = 1.0 / static_cast<double>(pass_probs.size());
  std::vector<double> scores(mean.rows());
  for (std::size_t i = 0; i < mean.rows(); ++i) {
    double expected = 0.0;
    for (const Matrix& p : pass_probs) expected += row_entropy(p.row(i));
    scores[i] = row_entropy(mean.row(i)) - expected * inv;
  }
  return scores;
}

AcquisitionResult bald_acquire(const MlpParams& params, const PoolState& pool,
                               std::size_t budget, std::size_t passes, Rng& rng) {
  if (!(params.dropout_rate > 0.0)) {
    throw ParameterError("bald_acquire: requires dropout_rate > 0");
  }
  if (passes < 2) throw ParameterError("bald_acquire: needs at least 2 passes");
  require_unlabeled(pool, budget, "bald_acquire");
  const Matrix x = gather_rows(pool.features(), pool.unlabeled());
  const auto probs = mc_dropout_probs(params, x, passes, rng);
  return top_k_result("bald", bald_scores(probs), pool, budget);
}

AcquisitionResult coreset_acquire(const MlpParams& params, const PoolState& pool,
                                  std::size_t budget) {
  require_unlabeled(pool, budget, "coreset_acquire");
  const auto& unl = pool.unlabeled();
  const Matrix zu = extract_features(params, gather_rows(pool.features(), unl));
  const Matrix zl = extract_features(params, gather_rows(pool.features(), pool.labeled()));

  std::vector<double> min_dist(unl.size(), std::numeric_limits<double>::infinity());
  auto absorb = [&](std::span<const double> center) {
    for (std::size_t u = 0; u < unl.size(); ++u) {
      if (min_dist[u] < 0.0) continue;
      const double d = std::sqrt(squared_distance(zu.row(u), center));
      if (d < min_dist[u]) min_dist[u] = d;
    }
  };
  for (std::size_t l = 0; l < zl.rows(); ++l) absorb(zl.row(l));

  AcquisitionResult r;
  r.method = "coreset";
  const std::size_t k = std::min(budget, unl.size());
  for (std::size_t pick = 0; pick < k; ++pick) {
    std::size_t best = unl.size();
    for (std::size_t u = 0; u < unl.size(); ++u) {
      if (min_dist[u] < 0.0) continue;
      if (best == unl.size() || min_dist[u] > min_dist[best]) best = u;
    }
    r.selected.push_back(unl[best]);
    r.scores.push_back(min_dist[best]);
    min_dist[best] = -1.0;  // taken
    absorb(zu.row(best));
  }
  return r;
}

void write_scores_csv(const AcquisitionResult& result, const PoolState& pool,
                      const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw StateError("cannot open " + path.string() + " for writing");
  os << "pool_index,score,selected\n";
  char buf[64];
  const auto& unl = pool.unlabeled();
  if (result.scores.size() == unl.size() && result.method != "coreset") {
    std::vector<char> chosen(unl.size(), 0);
    for (std::size_t s : result.selected) {
      chosen[static_cast<std::size_t>(std::lower_bound(unl.begin(), unl.end(), s) - unl.begin())] = 1;
    }
    for (std::size_t i = 0; i < unl.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", result.scores[i]);
      os << unl[i] << ',' << buf << ',' << int(chosen[i]) << '\n';
    }
    return;
  }
  for (std::size_t i = 0; i < result.selected.size(); ++i) {
    os << result.selected[i] << ',';
    if (i < result.scores.size()) {
      std::snprintf(buf, sizeof buf, "%.17g", result.scores[i]);
      os << buf;
    }
    os << ",1\n";
  }
}

}  // namespace mpts
