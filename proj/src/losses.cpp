#include "rdosr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rdosr/errors.hpp"

namespace rdosr {

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto out = p.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - mx);
      sum += out[c];
    }
    for (double& v : out) v /= sum;
  }
  return p;
}

LossResult softmax_xent(const Matrix& logits, const Matrix& onehot) {
  require_same_shape(logits, onehot, "softmax_xent");
  if (logits.rows() == 0) throw DimensionError("softmax_xent: empty batch");
  const double n = static_cast<double>(logits.rows());
  LossResult res;
  res.grad = Matrix(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    auto y = onehot.row(r);
    auto g = res.grad.row(r);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double log_sum = std::log(sum);
    for (std::size_t c = 0; c < z.size(); ++c) {
      const double log_p = z[c] - mx - log_sum;
      if (y[c] != 0.0) res.value -= y[c] * log_p;
      g[c] = (std::exp(log_p) - y[c]) / n;
    }
  }
  res.value /= n;
  return res;
}

LossResult l1_mean(const Matrix& x) {
  if (x.rows() == 0) throw DimensionError("l1_mean: empty batch");
  const double n = static_cast<double>(x.rows());
  LossResult res;
  res.grad = Matrix(x.rows(), x.cols());
  auto xv = x.values();
  auto g = res.grad.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    res.value += std::abs(xv[i]);
    g[i] = xv[i] > 0 ? 1.0 / n : (xv[i] < 0 ? -1.0 / n : 0.0);
  }
  res.value /= n;
  return res;
}

std::vector<double> row_distances(const Matrix& z, const Matrix& zhat) {
  require_same_shape(z, zhat, "row_distances");
  std::vector<double> d(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto a = z.row(r);
    auto b = zhat.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    d[r] = std::sqrt(s);
  }
  return d;
}

LossResult l2_recon_mean(const Matrix& z, const Matrix& zhat) {
  require_same_shape(z, zhat, "l2_recon_mean");
  if (z.rows() == 0) throw DimensionError("l2_recon_mean: empty batch");
  const double n = static_cast<double>(z.rows());
  const auto dist = row_distances(z, zhat);
  LossResult res;
  res.grad = Matrix(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    res.value += dist[r];
    if (dist[r] == 0.0) continue;
    auto a = z.row(r);
    auto b = zhat.row(r);
    auto g = res.grad.row(r);
    for (std::size_t c = 0; c < a.size(); ++c) g[c] = (b[c] - a[c]) / (dist[r] * n);
  }
  res.value /= n;
  return res;
}

Matrix one_hot(std::span<const int> labels, std::size_t classes) {
  Matrix y(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw DomainError("one_hot: label " + std::to_string(labels[i]) + " outside [0, " +
                        std::to_string(classes) + ")");
    y(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return y;
}

}  // namespace rdosr
