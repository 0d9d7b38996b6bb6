#pragma once

#include <cstddef>
#include <span>

#include "rdosr/matrix.hpp"

namespace rdosr {

// Scalar loss plus its gradient with respect to the (first differentiable)
// input, already divided by the batch size.
struct LossResult {
  double value = 0.0;
  Matrix grad;
};

// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

// Mean over rows of -Σ y log softmax(logits). grad = (p - y) / N.
LossResult softmax_xent(const Matrix& logits, const Matrix& onehot);

// (1/N) Σ_i ‖x_i‖₁. Subgradient 0 at exact zeros.
LossResult l1_mean(const Matrix& x);

// (1/N) Σ_i ‖z_i - ẑ_i‖₂ (Euclidean norm, not squared). grad is with respect to
// zhat; the gradient with respect to z is its negation. Rows with zero
// residual contribute a zero gradient.
LossResult l2_recon_mean(const Matrix& z, const Matrix& zhat);

// Per-row ‖z_i - ẑ_i‖₂.
std::vector<double> row_distances(const Matrix& z, const Matrix& zhat);

// labels are 0-based class indices.
Matrix one_hot(std::span<const int> labels, std::size_t classes);

}  // namespace rdosr
