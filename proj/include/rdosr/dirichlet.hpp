#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rdosr/layers.hpp"
#include "rdosr/losses.hpp"

// Stick-breaking Dirichlet encoder head.
//
// A hidden vector h is mapped to two per-stick vectors
//   u = sigmoid(h·Wu + bu)   in (0,1)^c
//   β = softplus(h·Wβ + bβ)  in (0,∞)^c
// then v_j = u_j^(1/β_j) (Kumaraswamy inverse-CDF form, deterministic) and
//   s_1 = v_1,  s_j = v_j · Π_{o<j} (1 - v_o).
// The resulting s is non-negative with Σ s = 1 - Π (1 - v) ≤ 1.
namespace rdosr::dirichlet {

// Sigmoid outputs are clamped to this range before the power.
inline constexpr double kUMin = 1e-7;
inline constexpr double kUMax = 1.0 - 1e-7;

// v = 1 - (1 - u^(1/β)). Throws DomainError unless u ∈ (0,1) and β > 0.
double kuma_v(double u, double beta);

struct KumaGrad {
  double du;
  double dbeta;
};
// Partial derivatives of kuma_v.
KumaGrad kuma_v_grad(double u, double beta);

Matrix kuma_v(const Matrix& u, const Matrix& beta);

std::vector<double> stick_break(std::span<const double> v);
// dL/dv given dL/ds, without dividing by (1 - v).
std::vector<double> stick_break_backward(std::span<const double> v, std::span<const double> ds);

Matrix stick_break(const Matrix& v);
Matrix stick_break_backward(const Matrix& v, const Matrix& ds);

// H(s) = -Σ ŝ_j log ŝ_j with ŝ = |s| / ‖s‖₁, 0·log 0 = 0.
double row_entropy(std::span<const double> s);

// Batch mean of row_entropy with its gradient. An all-zero row contributes 0
// with zero gradient.
LossResult entropy_sparsity(const Matrix& s);

struct StickTape {
  Matrix hidden;
  Matrix u_pre, u;
  Matrix beta_pre, beta;
  Matrix v;
};

class StickHead {
 public:
  StickHead() = default;
  StickHead(std::size_t hidden_width, std::size_t sticks, Rng& rng);

  std::size_t sticks() const noexcept { return u_affine.out(); }
  std::size_t in() const noexcept { return u_affine.in(); }

  Matrix encode(const Matrix& hidden) const;
  Matrix encode(const Matrix& hidden, StickTape& tape) const;
  // Accumulates parameter gradients; returns dL/dhidden.
  Matrix backward(const StickTape& tape, const Matrix& ds);

  std::vector<ParamBlock*> params();
  std::vector<const ParamBlock*> params() const;

  Dense u_affine;     // linear; sigmoid and clamp applied in encode
  Dense beta_affine;  // softplus
};

}  // namespace rdosr::dirichlet
