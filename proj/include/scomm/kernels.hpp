#pragma once

#include <cstddef>

// Dense kernels behind the tensor ops. Every kernel here has two versions:
// the OpenMP-parallel one used by the library, and a naive serial reference
// under kernels::ref used by tests and the benchmark. Both build each output
// element with the same accumulation order (k ascending, starting from +0.0,
// one final store/add), so the two versions and any thread count produce
// bit-identical results.
namespace scomm::kernels {

// Batched matrix product: c[b] (+)= op(a[b]) * op(B[b]), row-major.
// ta: a stored as [k x m] (use its transpose); tb: b stored as [n x k].
// a_stride/b_stride are per-batch element offsets; 0 broadcasts one matrix
// across the batch. c is always [batch, m, n]. ta && tb is unsupported.
void bmm(const double* a, size_t a_stride, bool ta, const double* b, size_t b_stride, bool tb,
         double* c, size_t batch, size_t m, size_t k, size_t n, bool accumulate);

// y = x * Phi(x), tanh approximation with the 0.044715 cubic constant.
void gelu(const double* x, double* y, size_t n);
// dx += g * gelu'(x)
void gelu_backward(const double* x, const double* g, double* dx, size_t n);

// Per-row normalization over the last axis, then affine gamma/beta.
// mean/inv_std (length rows) are saved for the backward pass.
void layer_norm(const double* x, const double* gamma, const double* beta, double eps, double* y,
                double* mean, double* inv_std, size_t rows, size_t d);
void layer_norm_backward(const double* x, const double* gamma, const double* mean,
                         const double* inv_std, const double* g, double* dx, double* dgamma,
                         double* dbeta, size_t rows, size_t d);

// Row-wise softmax with max subtraction.
void softmax(const double* x, double* y, size_t rows, size_t d);
// dx += y * (g - sum(g * y)) per row; y is the forward output.
void softmax_backward(const double* y, const double* g, double* dx, size_t rows, size_t d);

// out[i] = in[idx[i]]. idx must be injective so the backward scatter is
// race-free.
void gather(const double* in, const size_t* idx, double* out, size_t n);
// din[idx[i]] += g[i]
void scatter_add(const double* g, const size_t* idx, double* din, size_t n);

// y[r, :] = x[r, :] + b
void bias_add(const double* x, const double* b, double* y, size_t rows, size_t d);
// dx += g; db[j] += sum_r g[r, j]
void bias_add_backward(const double* g, double* dx, double* db, size_t rows, size_t d);

// y = a + b
void add(const double* a, const double* b, double* y, size_t n);
// y (+)= alpha * x
void axpy(double alpha, const double* x, double* y, size_t n, bool accumulate);

// Serial reductions; kept serial so the summation order never depends on
// the thread count.
double sum(const double* x, size_t n);
double sum_sq(const double* x, size_t n);
double mse(const double* a, const double* b, size_t n);

namespace ref {
void bmm(const double* a, size_t a_stride, bool ta, const double* b, size_t b_stride, bool tb,
         double* c, size_t batch, size_t m, size_t k, size_t n, bool accumulate);
void gelu(const double* x, double* y, size_t n);
void layer_norm(const double* x, const double* gamma, const double* beta, double eps, double* y,
                double* mean, double* inv_std, size_t rows, size_t d);
void softmax(const double* x, double* y, size_t rows, size_t d);
}  // namespace ref

}  // namespace scomm::kernels
