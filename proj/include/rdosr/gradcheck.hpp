#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rdosr/layers.hpp"

namespace rdosr {

using VectorLoss = std::function<double(std::span<const double>)>;

// max_i |analytic_i - fd_i| / max(1, |analytic_i|) with fd the central
// difference of `loss` at `point`. step must lie in [1e-7, 1e-3].
double grad_check(const VectorLoss& loss, std::span<const double> analytic,
                  std::span<const double> point, double step);

// Central-difference gradient of `loss` at `point`.
std::vector<double> numeric_gradient(const VectorLoss& loss, std::span<const double> point,
                                     double step);

// Same check over parameter blocks. `evaluate(true)` must return the loss and
// accumulate gradients into the blocks; `evaluate(false)` only returns the
// loss. Gradients are zeroed before the analytic pass. Parameter values are
// restored afterwards.
double grad_check_params(std::span<ParamBlock* const> params,
                         const std::function<double(bool)>& evaluate, double step);

}  // namespace rdosr
