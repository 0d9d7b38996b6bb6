#pragma once

#include <cstddef>
#include <span>

// Dense GEMM kernels behind Matrix products.
//
// Each product has a serial reference and an OpenMP version. Both accumulate
// every output element over the inner dimension in ascending order, so the two
// agree bit for bit regardless of thread count. Tests rely on that.
//
// Layout: row-major; a is m×k, b is k×n, c is m×n. c is overwritten.
namespace rdosr::kernels {

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

// c = aᵀ·b with a stored k×m.
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

// c = a·bᵀ with b stored n×k.
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

}  // namespace serial

namespace parallel {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

}  // namespace parallel

// Out-of-place transpose of a rows×cols block.
void transpose(std::span<const double> src, std::span<double> dst, std::size_t rows,
               std::size_t cols);

// Threads the parallel kernels will use in the calling thread.
int max_threads();
void set_threads(int n);

}  // namespace rdosr::kernels
