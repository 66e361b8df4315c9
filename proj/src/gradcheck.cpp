#include "mpts/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mpts/layers.hpp"
#include "mpts/matrix.hpp"
#include "mpts/mmd.hpp"
#include "mpts/model.hpp"
#include "mpts/rng.hpp"
#include "mpts/trainer.hpp"

namespace mpts {

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0;
  double na = 0.0;
  double nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double d = analytic[i] - numeric[i];
    diff += d * d;
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-7});
}

namespace {

constexpr std::size_t kInstances = 20;

// Central differences of f with respect to every entry of `x` (perturbed in place).
std::vector<double> numeric_grad(std::span<double> x, const std::function<double()>& f) {
  std::vector<double> g(x.size());
  const double h = kFiniteDifferenceStep;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

// Entries away from the ReLU kink so a step of h never crosses it.
Matrix kink_free_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) {
    do {
      v = rng.normal();
    } while (std::abs(v) < 1e-3);
  }
  return m;
}

double weighted_sum(const Matrix& y, const Matrix& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * weights.data()[i];
  return s;
}

std::size_t dim_in(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

void inject_into(std::vector<double>& g, double inject) {
  if (!g.empty()) g[0] += inject;
}

std::vector<double> flat(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

struct Tracker {
  GradcheckSuite suite;
  void add(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    suite.max_rel_error = std::max(suite.max_rel_error, relative_error(analytic, numeric));
  }
  GradcheckSuite done(std::size_t instances) {
    suite.instances = instances;
    suite.passed = suite.max_rel_error <= kGradcheckTolerance;
    return suite;
  }
};

GradcheckSuite check_affine(std::uint64_t seed, double inject) {
  Tracker t{{"affine"}};
  for (std::size_t k = 0; k < kInstances; ++k) {
    Rng rng = Rng::derive(seed, "gradcheck/affine", {k});
    const std::size_t n = dim_in(rng, 1, 6), d = dim_in(rng, 1, 6), m = dim_in(rng, 1, 6);
    Matrix x = random_matrix(n, d, rng);
    Matrix w = random_matrix(d, m, rng);
    std::vector<double> b(m);
    for (double& v : b) v = rng.normal();
    const Matrix proj = random_matrix(n, m, rng);
    auto loss = [&] { return weighted_sum(affine_forward(x, w, b), proj); };
    AffineGrads g = affine_backward(x, w, proj);
    auto gx = flat(g.dx);
    inject_into(gx, inject);
    t.add(gx, numeric_grad(x.data(), loss));
    t.add(flat(g.dw), numeric_grad(w.data(), loss));
    t.add(g.db, numeric_grad(b, loss));
  }
  return t.done(kInstances);
}

GradcheckSuite check_relu(std::uint64_t seed, double inject) {
  Tracker t{{"relu"}};
  for (std::size_t k = 0; k < kInstances; ++k) {
    Rng rng = Rng::derive(seed, "gradcheck/relu", {k});
    const std::size_t n = dim_in(rng, 1, 6), d = dim_in(rng, 1, 6);
    Matrix x = kink_free_matrix(n, d, rng);
    const Matrix proj = random_matrix(n, d, rng);
    auto g = flat(relu_backward(x, proj));
    inject_into(g, inject);
    t.add(g, numeric_grad(x.data(), [&] { return weighted_sum(relu(x), proj); }));
  }
  return t.done(kInstances);
}

GradcheckSuite check_softmax_ce(std::uint64_t seed, double inject) {
  Tracker t{{"softmax_cross_entropy"}};
  for (std::size_t k = 0; k < kInstances; ++k) {
    Rng rng = Rng::derive(seed, "gradcheck/softmax", {k});
    const std::size_t n = dim_in(rng, 1, 6), c = dim_in(rng, 2, 6);
    Matrix logits = random_matrix(n, c, rng, 2.0);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.below(c));
    auto g = flat(softmax_cross_entropy(logits, labels).dlogits);
    inject_into(g, inject);
    t.add(g, numeric_grad(logits.data(),
                          [&] { return softmax_cross_entropy(logits, labels).loss; }));
  }
  return t.done(kInstances);
}

GradcheckSuite check_dropout(std::uint64_t seed, double inject) {
  Tracker t{{"dropout"}};
  for (std::size_t k = 0; k < kInstances; ++k) {
    Rng rng = Rng::derive(seed, "gradcheck/dropout", {k});
    const std::size_t n = dim_in(rng, 1, 6), d = dim_in(rng, 1, 6);
    Matrix x = random_matrix(n, d, rng);
    const Matrix proj = random_matrix(n, d, rng);
    const double rate = 0.1 + 0.8 * rng.uniform();
    const Rng mask_rng = rng;
    // Same stream on every evaluation, so the mask is held fixed.
    auto loss = [&] {
      Rng r = mask_rng;
      return weighted_sum(dropout(x, rate, r, true).out, proj);
    };
    Rng r = mask_rng;
    const DropoutResult fwd = dropout(x, rate, r, true);
    auto g = flat(dropout_backward(fwd.mask, proj));
    inject_into(g, inject);
    t.add(g, numeric_grad(x.data(), loss));
  }
  return t.done(kInstances);
}

GradcheckSuite check_mmd(std::uint64_t seed, double inject, bool multi) {
  Tracker t{{multi ? "mmd2_grad (bandwidths 0.5,1,2 x sigma)" : "mmd2_grad (single bandwidth)"}};
  for (std::size_t k = 0; k < kInstances; ++k) {
    Rng rng = Rng::derive(seed, multi ? "gradcheck/mmd-multi" : "gradcheck/mmd", {k});
    const std::size_t a = dim_in(rng, 1, 8), b = dim_in(rng, 1, 8), d = dim_in(rng, 1, 5);
    Matrix za = random_matrix(a, d, rng);
    Matrix zb = random_matrix(b, d, rng);
    for (double& v : zb.data()) v += 0.5;
    const double sigma = 0.5 + 1.5 * rng.uniform();
    const KernelSpec spec = multi ? KernelSpec::multi_scale(sigma) : KernelSpec(sigma);
    MmdGrads g = mmd2_grad(za, zb, spec);
    auto loss = [&] { return mmd2_biased(za, zb, spec); };
    auto ga = flat(g.dza);
    inject_into(ga, inject);
    t.add(ga, numeric_grad(za.data(), loss));
    t.add(flat(g.dzb), numeric_grad(zb.data(), loss));
  }
  return t.done(kInstances);
}

// Every hidden pre-activation away from zero for both batches.
bool kink_free(const MlpParams& p, const Matrix& x) {
  Rng unused(0);
  const ForwardResult f = forward(p, x, false, unused);
  for (const Matrix& z : f.cache.pre) {
    for (double v : z.data()) {
      if (std::abs(v) < 1e-4) return false;
    }
  }
  return true;
}

GradcheckSuite check_end_to_end(std::uint64_t seed, double inject,
                                const std::vector<std::size_t>& sizes, std::size_t split) {
  std::string name = "end-to-end CE + lambda*MMD^2 [";
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    name += (i ? "," : "") + std::to_string(sizes[i]);
  }
  name += "] split " + std::to_string(split);
  Tracker t{{name}};
  std::size_t done = 0;
  for (std::size_t k = 0; done < kInstances; ++k) {
    Rng rng = Rng::derive(seed, "gradcheck/e2e", {sizes.size(), k});
    MlpParams p = init_mlp({sizes, split, 0.0}, rng);
    for (auto& layer : p.layers) {
      for (double& v : layer.b) v = 0.1 * rng.normal();
    }
    const Matrix xl = random_matrix(5, sizes.front(), rng);
    const Matrix xp = random_matrix(5, sizes.front(), rng);
    std::vector<int> y(5);
    for (int& l : y) l = static_cast<int>(rng.below(sizes.back()));
    if (!kink_free(p, xl) || !kink_free(p, xp)) continue;
    const double lambda = 0.5 + rng.uniform();
    const KernelSpec kernel(median_heuristic(extract_features(p, xp)));

    Rng unused(0);
    Objective obj = objective(p, xl, y, xp, lambda, kernel, unused);
    auto loss = [&] {
      Rng r(0);
      const Objective o = objective(p, xl, y, xp, lambda, kernel, r);
      return o.ce + lambda * o.mmd2;
    };
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto gw = flat(obj.grads[l].w);
      if (l == 0) inject_into(gw, inject);
      t.add(gw, numeric_grad(p.layers[l].w.data(), loss));
      t.add(obj.grads[l].b, numeric_grad(p.layers[l].b, loss));
    }
    ++done;
  }
  return t.done(done);
}

}  // namespace

std::vector<GradcheckSuite> run_gradcheck(std::uint64_t seed, double inject) {
  return {
      check_affine(seed, inject),
      check_relu(seed, inject),
      check_softmax_ce(seed, inject),
      check_dropout(seed, inject),
      check_mmd(seed, inject, false),
      check_mmd(seed, inject, true),
      check_end_to_end(seed, inject, {4, 8, 3}, 1),
      check_end_to_end(seed, inject, {4, 8, 6, 3}, 2),
  };
}

}  // namespace mpts
