#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "rdosr/matrix.hpp"

namespace rdosr {

using Rng = std::mt19937_64;

struct ParamBlock {
  Matrix value;
  Matrix grad;

  ParamBlock() = default;
  explicit ParamBlock(Matrix v) : value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.set_zero(); }
};

enum class Activation { identity, relu, sigmoid, softplus };

// Y = X·W + b, b broadcast over rows.
Matrix affine(const Matrix& w, const Matrix& b, const Matrix& x);

// Accumulates dW and db and returns dX. Pass need_dx=false to skip dX (an
// empty matrix is returned).
Matrix affine_backward(const Matrix& w, const Matrix& x, const Matrix& dy, Matrix& dw,
                       Matrix& db, bool need_dx = true);

// Elementwise activation. Throws NumericalError on non-finite input.
Matrix activate(Activation kind, const Matrix& x);

// Gradient through the activation, given its input and output.
Matrix activate_backward(Activation kind, const Matrix& x, const Matrix& y, const Matrix& dy);

double sigmoid(double x) noexcept;
double softplus(double x) noexcept;

// Fully connected layer with its own activation.
struct Dense {
  ParamBlock weight;  // in × out
  ParamBlock bias;    // 1 × out
  Activation act = Activation::identity;

  Dense() = default;
  Dense(std::size_t in, std::size_t out, Activation act, Rng& rng);

  std::size_t in() const noexcept { return weight.value.rows(); }
  std::size_t out() const noexcept { return weight.value.cols(); }

  Matrix forward(const Matrix& x) const;
};

// Intermediate values of one Mlp forward pass, needed for backward.
struct MlpTape {
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  std::vector<Matrix> post;    // activation output of each layer
};

class Mlp {
 public:
  Mlp() = default;
  // Hidden layers use `hidden`; the last width gets `output`.
  Mlp(std::size_t in, std::span<const std::size_t> widths, Activation hidden, Activation output,
      Rng& rng);

  std::size_t in() const;
  std::size_t out() const;
  std::size_t depth() const noexcept { return layers_.size(); }

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, MlpTape& tape) const;
  Matrix backward(const MlpTape& tape, const Matrix& dy, bool need_dx = true);

  std::vector<ParamBlock*> params();
  std::vector<const ParamBlock*> params() const;

  std::vector<Dense>& layers() noexcept { return layers_; }
  const std::vector<Dense>& layers() const noexcept { return layers_; }

 private:
  std::vector<Dense> layers_;
};

// Uniform Glorot initialisation: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace rdosr
