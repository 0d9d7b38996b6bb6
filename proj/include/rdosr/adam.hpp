#pragma once

#include <cstdint>
#include <vector>

#include "rdosr/layers.hpp"

namespace rdosr {

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::uint64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, double learning_rate)
      : first_moment(rows, cols), second_moment(rows, cols), lr(learning_rate) {}
};

// Bias-corrected Adam update of param.value from param.grad; zeroes the grad.
void adam_step(ParamBlock& param, AdamState& state);

// Adam over a fixed set of parameter blocks, one state per block.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<ParamBlock*> params, double lr);

  void zero_grad();
  void step();

  const std::vector<AdamState>& states() const noexcept { return states_; }

 private:
  std::vector<ParamBlock*> params_;
  std::vector<AdamState> states_;
};

}  // namespace rdosr
