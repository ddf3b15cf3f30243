#pragma once

#include "scomm/tensor.hpp"

namespace scomm {

// Differentiable ops. Every op takes the tape it should record on; passing
// nullptr runs the forward only (evaluation mode). Output requires_grad is
// set when the op was recorded and any input requires grad.

// [m,k] x [k,n] -> [m,n]
Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);

// [B,m,k] x [B,k,n] -> [B,m,n]; transpose_b reads b as [B,n,k].
Tensor bmm(Tape* tape, const Tensor& a, const Tensor& b, bool transpose_b = false);

// x: [..., d], b: [d]
Tensor bias_add(Tape* tape, const Tensor& x, const Tensor& b);

// Normalization over the last axis, then gamma * xhat + beta.
Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-8);

Tensor softmax(Tape* tape, const Tensor& x);
Tensor gelu(Tape* tape, const Tensor& x);
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& x, double c);

// out[i] = x[idx[i]]. idx must be injective.
Tensor gather(Tape* tape, const Tensor& x, std::shared_ptr<const std::vector<size_t>> idx,
              std::vector<size_t> out_shape);

Tensor reshape(Tape* tape, const Tensor& x, std::vector<size_t> shape);

// Mean of squared differences; differentiable w.r.t. both sides.
Tensor mse(Tape* tape, const Tensor& a, const Tensor& b);

Tensor sum(Tape* tape, const Tensor& x);

// Multi-head self-attention for one token sequence [t,d].
Tensor attention(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v, size_t heads);

// Batched attention over [B,t,d] with an optional additive score mask of
// shape [B*heads, t, t] (pass nullptr for none).
Tensor attention_batched(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v,
                         size_t heads, const Tensor& mask);

// [h,w,d] -> [nw, win*win, d], non-overlapping win x win tiles in raster
// order; window_merge is the exact inverse.
Tensor window_partition(Tape* tape, const Tensor& x, size_t win);
Tensor window_merge(Tape* tape, const Tensor& x, size_t h, size_t w, size_t win);

// x * sqrt(n) / ||x|| so that mean(out^2) == 1. 1-D input, rejects the zero
// vector.
Tensor normalize_power(Tape* tape, const Tensor& x);

// y = x + c elementwise; c is constant so the gradient passes through
// unchanged. Used for channel noise.
Tensor add_constant(Tape* tape, const Tensor& x, const std::vector<double>& c);

// Central-difference check of one scalar function against the analytic
// gradients its backward pass produces. Returns the max over coordinates of
// |difference| / max(1, |analytic|).
double grad_check(const std::function<Tensor(Tape*)>& f, const std::vector<Tensor>& params,
                  double h = 1e-5);

}  // namespace scomm
