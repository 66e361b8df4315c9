#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mpts/matrix.hpp"
#include "mpts/rng.hpp"

namespace mpts {

// Layer primitives with hand-derived gradients. All reductions run in
// ascending index order so results are reproducible bit-for-bit.

/// Y = X*W + b.
Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b);

struct AffineGrads {
  Matrix dx;
  Matrix dw;
  std::vector<double> db;
};

/// dX = dY*W^T, dW = X^T*dY, db = column sums of dY.
AffineGrads affine_backward(const Matrix& x, const Matrix& w, const Matrix& dy);

Matrix relu(const Matrix& x);

/// Passes dY where x > 0; the derivative at exactly 0 is taken as 0.
Matrix relu_backward(const Matrix& x, const Matrix& dy);

/// Row-wise softmax in the max-shifted form.
Matrix softmax(const Matrix& logits);

struct CrossEntropy {
  double loss = 0.0;  // mean over rows
  Matrix probs;
  Matrix dlogits;     // (probs - onehot) / n
};

CrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

struct DropoutResult {
  Matrix out;
  Matrix mask;  // scaled keep mask: 0 or 1/(1-rate); empty when inactive
};

/// Inverted dropout. Identity when !train_mode or rate == 0 (no draws are made).
DropoutResult dropout(const Matrix& x, double rate, Rng& rng, bool train_mode);

/// dX = dY .* mask; an empty mask means the identity.
Matrix dropout_backward(const Matrix& mask, const Matrix& dy);

}  // namespace mpts
