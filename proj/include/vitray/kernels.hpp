#pragma once

#include <cstddef>

// Dense float64 compute kernels. Every public kernel has an OpenMP-parallel
// body and dispatches to the serial reference in kernels::serial below a
// work threshold (or when already inside a parallel region). Parallel loops
// only ever split across independent output elements -- each element's
// accumulation order is identical in both paths -- so the parallel kernels
// produce bitwise-identical results to the serial references at any thread
// count. tests/test_kernels.cpp pins that equality; bench/ compares their
// throughput.

namespace vitray::kernels {

// Serial reference implementations. Straight loops, no pragmas; kept as the
// ground truth the parallel kernels are tested against.
namespace serial {

/// C[m x n] = A[m x k] * B[k x n]
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);

/// C[m x n] = A[m x k] * B[n x k]^T
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

/// C[k x n] = A[m x k]^T * B[m x n]
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

void add(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(const double* a, double s, double* out, std::size_t n);
/// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

/// out[r x c] = a[r x c] + bias[c] broadcast over rows
void add_bias_rows(const double* a, const double* bias, double* out,
                   std::size_t rows, std::size_t cols);
/// out[c] = column sums of a[r x c]
void col_sum(const double* a, double* out, std::size_t rows, std::size_t cols);

/// Numerically stable softmax over `len`-sized slices. The input is viewed
/// as [outer x len x inner]; each (o, i) pair selects one independent slice.
void softmax_slices(const double* in, double* out,
                    std::size_t outer, std::size_t len, std::size_t inner);
/// dx = y * (dy - dot(dy, y)) per slice, same slice layout as softmax_slices.
void softmax_backward_slices(const double* y, const double* dy, double* dx,
                             std::size_t outer, std::size_t len, std::size_t inner);

/// Per-row normalization to zero mean / unit (biased) variance followed by
/// gamma/beta. Optionally stores per-row mean and reciprocal std for the
/// backward pass.
void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double eps, double* y, double* mean_out, double* rstd_out,
                     std::size_t rows, std::size_t cols);
void layer_norm_backward_rows(const double* x, const double* gamma,
                              const double* mean, const double* rstd,
                              const double* dy, double* dx, double* dgamma,
                              double* dbeta, std::size_t rows, std::size_t cols);

/// Exact-erf GELU: x * Phi(x).
void gelu(const double* x, double* y, std::size_t n);
/// dx = dy * (Phi(x) + x * phi(x))
void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n);

} // namespace serial

// Parallel front ends (same contracts as the serial references).
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(const double* a, double s, double* out, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void add_bias_rows(const double* a, const double* bias, double* out,
                   std::size_t rows, std::size_t cols);
void col_sum(const double* a, double* out, std::size_t rows, std::size_t cols);
void softmax_slices(const double* in, double* out,
                    std::size_t outer, std::size_t len, std::size_t inner);
void softmax_backward_slices(const double* y, const double* dy, double* dx,
                             std::size_t outer, std::size_t len, std::size_t inner);
void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double eps, double* y, double* mean_out, double* rstd_out,
                     std::size_t rows, std::size_t cols);
void layer_norm_backward_rows(const double* x, const double* gamma,
                              const double* mean, const double* rstd,
                              const double* dy, double* dx, double* dgamma,
                              double* dbeta, std::size_t rows, std::size_t cols);
void gelu(const double* x, double* y, std::size_t n);
void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n);

/// Sequential sum. Reductions are never parallelized: a fixed left-to-right
/// order keeps results identical across thread counts.
double sum(const double* x, std::size_t n);

/// True when a kernel with `work` scalar operations should fan out.
bool should_parallelize(std::size_t work);

} // namespace vitray::kernels
