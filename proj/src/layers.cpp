#include "rdosr/layers.hpp"

#include <cmath>
#include <string>

#include "rdosr/errors.hpp"

namespace rdosr {

Matrix affine(const Matrix& w, const Matrix& b, const Matrix& x) {
  if (x.cols() != w.rows())
    throw DimensionError("affine: input " + shape_string(x.rows(), x.cols()) + " vs weight " +
                         shape_string(w.rows(), w.cols()));
  if (b.rows() != 1 || b.cols() != w.cols())
    throw DimensionError("affine: bias " + shape_string(b.rows(), b.cols()) + " vs weight " +
                         shape_string(w.rows(), w.cols()));
  Matrix y = matmul(x, w);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b(0, c);
  }
  return y;
}

Matrix affine_backward(const Matrix& w, const Matrix& x, const Matrix& dy, Matrix& dw,
                       Matrix& db, bool need_dx) {
  if (dy.rows() != x.rows() || dy.cols() != w.cols() || x.cols() != w.rows())
    throw DimensionError("affine_backward: dy " + shape_string(dy.rows(), dy.cols()) +
                         " vs input " + shape_string(x.rows(), x.cols()) + " and weight " +
                         shape_string(w.rows(), w.cols()));
  dw += matmul_tn(x, dy);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto row = dy.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) db(0, c) += row[c];
  }
  if (!need_dx) return {};
  return matmul_nt(dy, w);
}

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept {
  // log(1 + e^x) without overflow
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Matrix activate(Activation kind, const Matrix& x) {
  require_finite(x, "activation input");
  Matrix y = x;
  switch (kind) {
    case Activation::identity:
      break;
    case Activation::relu:
      for (double& v : y.values()) v = v > 0 ? v : 0.0;
      break;
    case Activation::sigmoid:
      for (double& v : y.values()) v = sigmoid(v);
      break;
    case Activation::softplus:
      for (double& v : y.values()) v = softplus(v);
      break;
  }
  return y;
}

Matrix activate_backward(Activation kind, const Matrix& x, const Matrix& y, const Matrix& dy) {
  require_same_shape(x, dy, "activation backward");
  Matrix dx = dy;
  auto g = dx.values();
  auto xv = x.values();
  auto yv = y.values();
  switch (kind) {
    case Activation::identity:
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!(xv[i] > 0)) g[i] = 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= yv[i] * (1.0 - yv[i]);
      break;
    case Activation::softplus:
      // d/dx log(1 + e^x) = sigmoid(x)
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= sigmoid(xv[i]);
      break;
  }
  return dx;
}

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(fan_in, fan_out);
  for (double& v : w.values()) v = dist(rng);
  return w;
}

Dense::Dense(std::size_t in, std::size_t out, Activation a, Rng& rng)
    : weight(glorot_uniform(in, out, rng)), bias(Matrix(1, out)), act(a) {}

Matrix Dense::forward(const Matrix& x) const {
  return activate(act, affine(weight.value, bias.value, x));
}

Mlp::Mlp(std::size_t in, std::span<const std::size_t> widths, Activation hidden,
         Activation output, Rng& rng) {
  if (widths.empty()) throw DomainError("Mlp needs at least one layer");
  std::size_t prev = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const Activation a = i + 1 == widths.size() ? output : hidden;
    layers_.emplace_back(prev, widths[i], a, rng);
    prev = widths[i];
  }
}

std::size_t Mlp::in() const { return layers_.empty() ? 0 : layers_.front().in(); }
std::size_t Mlp::out() const { return layers_.empty() ? 0 : layers_.back().out(); }

Matrix Mlp::forward(const Matrix& x) const {
  Matrix h = x;
  for (const auto& layer : layers_) h = layer.forward(h);
  return h;
}

Matrix Mlp::forward(const Matrix& x, MlpTape& tape) const {
  tape.inputs.clear();
  tape.pre.clear();
  tape.post.clear();
  Matrix h = x;
  for (const auto& layer : layers_) {
    tape.inputs.push_back(h);
    tape.pre.push_back(affine(layer.weight.value, layer.bias.value, h));
    tape.post.push_back(activate(layer.act, tape.pre.back()));
    h = tape.post.back();
  }
  return h;
}

Matrix Mlp::backward(const MlpTape& tape, const Matrix& dy, bool need_dx) {
  if (tape.pre.size() != layers_.size()) throw StateError("Mlp::backward without matching tape");
  Matrix g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    auto& layer = layers_[i];
    g = activate_backward(layer.act, tape.pre[i], tape.post[i], g);
    g = affine_backward(layer.weight.value, tape.inputs[i], g, layer.weight.grad,
                        layer.bias.grad, need_dx || i > 0);
  }
  return g;
}

std::vector<ParamBlock*> Mlp::params() {
  std::vector<ParamBlock*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const ParamBlock*> Mlp::params() const {
  std::vector<const ParamBlock*> out;
  for (const auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

}  // namespace rdosr
