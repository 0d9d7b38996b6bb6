#include "rdosr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rdosr/errors.hpp"

namespace rdosr {

namespace {

void check_step(double step) {
  if (!(step >= 1e-7 && step <= 1e-3))
    throw DomainError("grad_check: step " + std::to_string(step) + " outside [1e-7, 1e-3]");
}

double probe(const VectorLoss& loss, std::span<const double> x) {
  const double v = loss(x);
  if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite loss at probe point");
  return v;
}

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

std::vector<double> numeric_gradient(const VectorLoss& loss, std::span<const double> point,
                                     double step) {
  check_step(step);
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = probe(loss, x);
    x[i] = orig - step;
    const double down = probe(loss, x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

double grad_check(const VectorLoss& loss, std::span<const double> analytic,
                  std::span<const double> point, double step) {
  if (analytic.size() != point.size())
    throw DimensionError("grad_check: gradient length differs from point length");
  const auto numeric = numeric_gradient(loss, point, step);
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i)
    worst = std::max(worst, rel_error(analytic[i], numeric[i]));
  return worst;
}

double grad_check_params(std::span<ParamBlock* const> params,
                         const std::function<double(bool)>& evaluate, double step) {
  check_step(step);
  for (auto* p : params) p->zero_grad();
  if (!std::isfinite(evaluate(true)))
    throw NumericalError("grad_check: non-finite loss at base point");

  double worst = 0.0;
  for (auto* p : params) {
    auto w = p->value.values();
    auto g = p->grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + step;
      const double up = evaluate(false);
      w[i] = orig - step;
      const double down = evaluate(false);
      w[i] = orig;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericalError("grad_check: non-finite loss at probe point");
      worst = std::max(worst, rel_error(g[i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

}  // namespace rdosr
