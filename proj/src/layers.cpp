#include "mpts/layers.hpp"

#include <cmath>
#include <string>

#include "mpts/error.hpp"

namespace mpts {

Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b) {
  if (x.cols() != w.rows() || b.size() != w.cols()) {
    throw DimensionError("affine_forward: X " + x.shape_str() + ", W " + w.shape_str() +
                         ", b 1x" + std::to_string(b.size()));
  }
  Matrix y = matmul(x, w);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
  }
  return y;
}

AffineGrads affine_backward(const Matrix& x, const Matrix& w, const Matrix& dy) {
  if (x.cols() != w.rows() || dy.rows() != x.rows() || dy.cols() != w.cols()) {
    throw DimensionError("affine_backward: X " + x.shape_str() + ", W " + w.shape_str() +
                         ", dY " + dy.shape_str());
  }
  AffineGrads g;
  g.dx = matmul(dy, transpose(w));
  g.dw = matmul(transpose(x), dy);
  g.db = column_sums(dy);
  return g;
}

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  if (x.rows() != dy.rows() || x.cols() != dy.cols()) {
    throw DimensionError("relu_backward: X " + x.shape_str() + ", dY " + dy.shape_str());
  }
  Matrix dx(x.rows(), x.cols());
  const auto xs = x.data();
  const auto ds = dy.data();
  auto out = dx.data();
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] > 0.0 ? ds[i] : 0.0;
  return dx;
}

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    auto out = p.row(i);
    double m = z[0];
    for (double v : z) m = v > m ? v : m;
    double s = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      out[c] = std::exp(z[c] - m);
      s += out[c];
    }
    for (double& v : out) v /= s;
  }
  return p;
}

CrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  const std::size_t n = logits.rows();
  const std::size_t classes = logits.cols();
  if (n == 0 || classes == 0) throw DimensionError("softmax_cross_entropy: empty logits");
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: logits " + logits.shape_str() + ", " +
                         std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw IndexError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
  }

  CrossEntropy ce;
  ce.probs = Matrix(n, classes);
  ce.dlogits = Matrix(n, classes);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = logits.row(i);
    double m = z[0];
    for (double v : z) m = v > m ? v : m;
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    const double log_s = std::log(s);
    auto p = ce.probs.row(i);
    for (std::size_t c = 0; c < classes; ++c) p[c] = std::exp(z[c] - m) / s;
    // -log p_y computed from the shifted logits; stays finite when p_y underflows.
    total += log_s - (z[labels[i]] - m);
    auto d = ce.dlogits.row(i);
    for (std::size_t c = 0; c < classes; ++c) d[c] = p[c] * inv_n;
    d[labels[i]] -= inv_n;
  }
  ce.loss = total * inv_n;
  return ce;
}

DropoutResult dropout(const Matrix& x, double rate, Rng& rng, bool train_mode) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate " + std::to_string(rate) + " outside [0, 1)");
  }
  if (!train_mode || rate == 0.0) return {x, Matrix{}};
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  DropoutResult r{x, Matrix(x.rows(), x.cols())};
  auto out = r.out.data();
  auto mask = r.mask.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < keep ? scale : 0.0;
    out[i] *= mask[i];
  }
  return r;
}

Matrix dropout_backward(const Matrix& mask, const Matrix& dy) {
  if (mask.empty()) return dy;
  if (mask.rows() != dy.rows() || mask.cols() != dy.cols()) {
    throw DimensionError("dropout_backward: mask " + mask.shape_str() + ", dY " +
                         dy.shape_str());
  }
  Matrix dx = dy;
  auto d = dx.data();
  const auto m = mask.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= m[i];
  return dx;
}

}  // namespace mpts
