#include "rdosr/kernels.hpp"

#include <algorithm>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace rdosr::kernels {

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = s;
    }
  }
}

}  // namespace serial

namespace {

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColBlock = 256;

// Rows [i0, i1) of c = a·b. Accumulation over p is ascending, matching the
// serial dot-product loop element for element.
void gemm_rows(const double* a, const double* b, double* c, std::size_t i0, std::size_t i1,
               std::size_t k, std::size_t n) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
    const std::size_t j1 = std::min(n, j0 + kColBlock);
    std::size_t i = i0;
    for (; i + kRowBlock <= i1; i += kRowBlock) {
      double* c0 = c + i * n;
      double* c1 = c0 + n;
      double* c2 = c1 + n;
      double* c3 = c2 + n;
      for (std::size_t j = j0; j < j1; ++j) c0[j] = c1[j] = c2[j] = c3[j] = 0.0;
      const double* a0 = a + i * k;
      const double* a1 = a0 + k;
      const double* a2 = a1 + k;
      const double* a3 = a2 + k;
      for (std::size_t p = 0; p < k; ++p) {
        const double* bp = b + p * n;
        const double x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
        for (std::size_t j = j0; j < j1; ++j) {
          const double bv = bp[j];
          c0[j] += x0 * bv;
          c1[j] += x1 * bv;
          c2[j] += x2 * bv;
          c3[j] += x3 * bv;
        }
      }
    }
    for (; i < i1; ++i) {
      double* ci = c + i * n;
      for (std::size_t j = j0; j < j1; ++j) ci[j] = 0.0;
      const double* ai = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double* bp = b + p * n;
        const double x = ai[p];
        for (std::size_t j = j0; j < j1; ++j) ci[j] += x * bp[j];
      }
    }
  }
}

}  // namespace

namespace parallel {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  const std::size_t blocks = (m + kRowBlock - 1) / kRowBlock;
  const long long nblocks = static_cast<long long>(blocks);
  const bool worth_it = m * k * n > (1u << 16);
#pragma omp parallel for schedule(static) if (worth_it)
  for (long long blk = 0; blk < nblocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * kRowBlock;
    const std::size_t i1 = std::min(m, i0 + kRowBlock);
    gemm_rows(a.data(), b.data(), c.data(), i0, i1, k, n);
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> at(m * k);
  transpose(a, at, k, m);
  gemm_nn(at, b, c, m, k, n);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> bt(k * n);
  transpose(b, bt, n, k);
  gemm_nn(a, bt, c, m, k, n);
}

}  // namespace parallel

void transpose(std::span<const double> src, std::span<double> dst, std::size_t rows,
               std::size_t cols) {
  constexpr std::size_t tile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += tile) {
    const std::size_t r1 = std::min(rows, r0 + tile);
    for (std::size_t c0 = 0; c0 < cols; c0 += tile) {
      const std::size_t c1 = std::min(cols, c0 + tile);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t cc = c0; cc < c1; ++cc) dst[cc * rows + r] = src[r * cols + cc];
    }
  }
}

int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#if defined(_OPENMP)
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

}  // namespace rdosr::kernels
