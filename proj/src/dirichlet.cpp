#include "rdosr/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rdosr/errors.hpp"

namespace rdosr::dirichlet {

namespace {

void check_domain(double u, double beta) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("kuma_v: u=" + std::to_string(u) + " not in (0,1)");
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw DomainError("kuma_v: beta=" + std::to_string(beta) + " not positive");
}

}  // namespace

double kuma_v(double u, double beta) {
  check_domain(u, beta);
  const double w = std::pow(u, 1.0 / beta);
  return 1.0 - (1.0 - w);
}

KumaGrad kuma_v_grad(double u, double beta) {
  check_domain(u, beta);
  const double w = std::pow(u, 1.0 / beta);
  return {w / (beta * u), -w * std::log(u) / (beta * beta)};
}

Matrix kuma_v(const Matrix& u, const Matrix& beta) {
  require_same_shape(u, beta, "kuma_v");
  Matrix v(u.rows(), u.cols());
  auto uv = u.values();
  auto bv = beta.values();
  auto out = v.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = kuma_v(uv[i], bv[i]);
  return v;
}

std::vector<double> stick_break(std::span<const double> v) {
  std::vector<double> s(v.size());
  double remaining = 1.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    s[j] = v[j] * remaining;
    remaining *= 1.0 - v[j];
  }
  return s;
}

std::vector<double> stick_break_backward(std::span<const double> v, std::span<const double> ds) {
  if (v.size() != ds.size()) throw DimensionError("stick_break_backward: length mismatch");
  const std::size_t c = v.size();
  // remaining[j] = Π_{o<j} (1 - v_o)
  std::vector<double> remaining(c + 1);
  remaining[0] = 1.0;
  for (std::size_t j = 0; j < c; ++j) remaining[j + 1] = remaining[j] * (1.0 - v[j]);

  std::vector<double> dv(c);
  double d_next = 0.0;  // dL/d remaining[j+1]
  for (std::size_t j = c; j-- > 0;) {
    dv[j] = ds[j] * remaining[j] - d_next * remaining[j];
    d_next = ds[j] * v[j] + d_next * (1.0 - v[j]);
  }
  return dv;
}

Matrix stick_break(const Matrix& v) {
  Matrix s(v.rows(), v.cols());
  for (std::size_t r = 0; r < v.rows(); ++r) {
    const auto row = stick_break(v.row(r));
    std::copy(row.begin(), row.end(), s.row(r).begin());
  }
  return s;
}

Matrix stick_break_backward(const Matrix& v, const Matrix& ds) {
  require_same_shape(v, ds, "stick_break_backward");
  Matrix dv(v.rows(), v.cols());
  for (std::size_t r = 0; r < v.rows(); ++r) {
    const auto row = stick_break_backward(v.row(r), ds.row(r));
    std::copy(row.begin(), row.end(), dv.row(r).begin());
  }
  return dv;
}

double row_entropy(std::span<const double> s) {
  double norm = 0.0;
  for (double x : s) norm += std::abs(x);
  if (norm == 0.0) return 0.0;
  double h = 0.0;
  for (double x : s) {
    const double p = std::abs(x) / norm;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

LossResult entropy_sparsity(const Matrix& s) {
  if (s.rows() == 0) throw DimensionError("entropy_sparsity: empty batch");
  const double n = static_cast<double>(s.rows());
  LossResult res;
  res.grad = Matrix(s.rows(), s.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    double norm = 0.0;
    for (double x : row) norm += std::abs(x);
    if (norm == 0.0) continue;
    const double h = row_entropy(row);
    res.value += h;
    // dH/ds_j = sign(s_j) (-log ŝ_j - H) / ‖s‖₁, zero where s_j = 0
    auto g = res.grad.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] == 0.0) continue;
      const double p = std::abs(row[j]) / norm;
      const double sign = row[j] > 0 ? 1.0 : -1.0;
      g[j] = sign * (-std::log(p) - h) / (norm * n);
    }
  }
  res.value /= n;
  return res;
}

StickHead::StickHead(std::size_t hidden_width, std::size_t sticks, Rng& rng)
    : u_affine(hidden_width, sticks, Activation::identity, rng),
      beta_affine(hidden_width, sticks, Activation::softplus, rng) {}

Matrix StickHead::encode(const Matrix& hidden) const {
  StickTape tape;
  return encode(hidden, tape);
}

Matrix StickHead::encode(const Matrix& hidden, StickTape& tape) const {
  if (hidden.cols() != in())
    throw DimensionError("StickHead: hidden " + shape_string(hidden.rows(), hidden.cols()) +
                         " vs head input width " + std::to_string(in()));
  tape.hidden = hidden;
  tape.u_pre = affine(u_affine.weight.value, u_affine.bias.value, hidden);
  tape.u = activate(Activation::sigmoid, tape.u_pre);
  for (double& x : tape.u.values()) x = std::clamp(x, kUMin, kUMax);
  tape.beta_pre = affine(beta_affine.weight.value, beta_affine.bias.value, hidden);
  tape.beta = activate(Activation::softplus, tape.beta_pre);
  // softplus underflows to 0 for very negative inputs
  for (double& x : tape.beta.values()) x = std::max(x, std::numeric_limits<double>::min());
  tape.v = kuma_v(tape.u, tape.beta);
  return stick_break(tape.v);
}

Matrix StickHead::backward(const StickTape& tape, const Matrix& ds) {
  const Matrix dv = stick_break_backward(tape.v, ds);
  Matrix du_pre(dv.rows(), dv.cols());
  Matrix dbeta(dv.rows(), dv.cols());
  for (std::size_t i = 0; i < dv.size(); ++i) {
    const double u = tape.u.values()[i];
    const double b = tape.beta.values()[i];
    const auto g = kuma_v_grad(u, b);
    // clamped sigmoid: no gradient where the clamp is active
    const bool clamped = u <= kUMin || u >= kUMax;
    du_pre.values()[i] = clamped ? 0.0 : dv.values()[i] * g.du * u * (1.0 - u);
    dbeta.values()[i] = dv.values()[i] * g.dbeta;
  }
  const Matrix dbeta_pre = activate_backward(Activation::softplus, tape.beta_pre, tape.beta, dbeta);
  Matrix dh = affine_backward(u_affine.weight.value, tape.hidden, du_pre, u_affine.weight.grad,
                              u_affine.bias.grad);
  dh += affine_backward(beta_affine.weight.value, tape.hidden, dbeta_pre,
                        beta_affine.weight.grad, beta_affine.bias.grad);
  return dh;
}

std::vector<ParamBlock*> StickHead::params() {
  return {&u_affine.weight, &u_affine.bias, &beta_affine.weight, &beta_affine.bias};
}

std::vector<const ParamBlock*> StickHead::params() const {
  return {&u_affine.weight, &u_affine.bias, &beta_affine.weight, &beta_affine.bias};
}

}  // namespace rdosr::dirichlet
