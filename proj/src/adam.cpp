#include "rdosr/adam.hpp"

#include <cmath>

#include "rdosr/errors.hpp"

namespace rdosr {

void adam_step(ParamBlock& param, AdamState& state) {
  require_same_shape(param.value, param.grad, "adam_step");
  require_same_shape(param.value, state.first_moment, "adam_step moments");
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto w = param.value.values();
  auto g = param.grad.values();
  auto m = state.first_moment.values();
  auto v = state.second_moment.values();
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    w[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
  param.zero_grad();
}

Adam::Adam(std::vector<ParamBlock*> params, double lr) : params_(std::move(params)) {
  states_.reserve(params_.size());
  for (const auto* p : params_) states_.emplace_back(p->value.rows(), p->value.cols(), lr);
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], states_[i]);
}

}  // namespace rdosr
