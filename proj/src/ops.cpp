#include "scomm/ops.hpp"

#include <cmath>
#include <memory>

#include "scomm/errors.hpp"
#include "scomm/kernels.hpp"

namespace scomm {

namespace {

bool tracked(Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape) return false;
    for (const Tensor* t : inputs)
        if ((*t)->requires_grad) return true;
    return false;
}

Tensor output(std::vector<size_t> shape, bool requires_grad, const char* op) {
    auto t = make_tensor(std::move(shape));
    t->requires_grad = requires_grad;
    (void)op;
    return t;
}

// Batched matmul shapes: a [B,m,k], b [B,k,n] (or [B,n,k] transposed).
struct BmmDims {
    size_t batch, m, k, n;
};

BmmDims bmm_dims(const Tensor& a, const Tensor& b, bool transpose_b) {
    if (a->shape.size() != 3 || b->shape.size() != 3)
        throw ShapeError("bmm: expected rank-3 tensors, got " + shape_str(a->shape) + " x " +
                         shape_str(b->shape));
    BmmDims d{};
    d.batch = a->shape[0];
    d.m = a->shape[1];
    d.k = a->shape[2];
    d.n = transpose_b ? b->shape[1] : b->shape[2];
    const size_t bk = transpose_b ? b->shape[2] : b->shape[1];
    if (b->shape[0] != d.batch || bk != d.k)
        throw ShapeError("bmm: incompatible shapes " + shape_str(a->shape) + " x " +
                         shape_str(b->shape));
    return d;
}

}  // namespace

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
        throw ShapeError("matmul: incompatible shapes " + shape_str(a->shape) + " x " +
                         shape_str(b->shape));
    const size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
    const bool rec = tracked(tape, {&a, &b});
    Tensor out = output({m, n}, rec, "matmul");
    kernels::bmm(a->values.data(), 0, false, b->values.data(), 0, false, out->values.data(), 1, m,
                 k, n, false);
    check_finite(*out, "matmul");
    if (rec) {
        tape->record([a, b, out, m, k, n] {
            if (out->grad.empty()) return;
            if (a->requires_grad) {
                a->ensure_grad();
                kernels::bmm(out->grad.data(), 0, false, b->values.data(), 0, true,
                             a->grad.data(), 1, m, n, k, true);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                kernels::bmm(a->values.data(), 0, true, out->grad.data(), 0, false,
                             b->grad.data(), 1, k, m, n, true);
            }
        });
    }
    return out;
}

Tensor bmm(Tape* tape, const Tensor& a, const Tensor& b, bool transpose_b) {
    const BmmDims d = bmm_dims(a, b, transpose_b);
    const bool rec = tracked(tape, {&a, &b});
    Tensor out = output({d.batch, d.m, d.n}, rec, "bmm");
    kernels::bmm(a->values.data(), d.m * d.k, false, b->values.data(),
                 transpose_b ? d.n * d.k : d.k * d.n, transpose_b, out->values.data(), d.batch,
                 d.m, d.k, d.n, false);
    check_finite(*out, "bmm");
    if (rec) {
        tape->record([a, b, out, d, transpose_b] {
            if (out->grad.empty()) return;
            if (a->requires_grad) {
                a->ensure_grad();
                if (!transpose_b) {
                    // da = g . b^T
                    kernels::bmm(out->grad.data(), d.m * d.n, false, b->values.data(),
                                 d.k * d.n, true, a->grad.data(), d.batch, d.m, d.n, d.k, true);
                } else {
                    // forward was a . b^T with b [B,n,k]; da = g . b
                    kernels::bmm(out->grad.data(), d.m * d.n, false, b->values.data(),
                                 d.n * d.k, false, a->grad.data(), d.batch, d.m, d.n, d.k, true);
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                if (!transpose_b) {
                    // db = a^T . g
                    kernels::bmm(a->values.data(), d.m * d.k, true, out->grad.data(),
                                 d.m * d.n, false, b->grad.data(), d.batch, d.k, d.m, d.n, true);
                } else {
                    // db = g^T . a
                    kernels::bmm(out->grad.data(), d.m * d.n, true, a->values.data(),
                                 d.m * d.k, false, b->grad.data(), d.batch, d.n, d.m, d.k, true);
                }
            }
        });
    }
    return out;
}

Tensor bias_add(Tape* tape, const Tensor& x, const Tensor& b) {
    if (x->shape.empty() || b->shape.size() != 1 || x->shape.back() != b->shape[0])
        throw ShapeError("bias_add: " + shape_str(x->shape) + " + " + shape_str(b->shape));
    const size_t dim = b->shape[0];
    const size_t rows = x->numel() / dim;
    const bool rec = tracked(tape, {&x, &b});
    Tensor out = output(x->shape, rec, "bias_add");
    kernels::bias_add(x->values.data(), b->values.data(), out->values.data(), rows, dim);
    check_finite(*out, "bias_add");
    if (rec) {
        tape->record([x, b, out, rows, dim] {
            if (out->grad.empty()) return;
            if (x->requires_grad && b->requires_grad) {
                x->ensure_grad();
                b->ensure_grad();
                kernels::bias_add_backward(out->grad.data(), x->grad.data(), b->grad.data(),
                                           rows, dim);
            } else if (x->requires_grad) {
                x->ensure_grad();
                kernels::axpy(1.0, out->grad.data(), x->grad.data(), out->numel(), true);
            } else if (b->requires_grad) {
                b->ensure_grad();
                for (size_t j = 0; j < dim; ++j) {
                    double s = 0.0;
                    for (size_t r = 0; r < rows; ++r) s += out->grad[r * dim + j];
                    b->grad[j] += s;
                }
            }
        });
    }
    return out;
}

Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
    if (x->shape.empty() || x->shape.back() == 0) throw ShapeError("layer_norm: empty last axis");
    const size_t d = x->shape.back();
    if (gamma->shape != std::vector<size_t>{d} || beta->shape != std::vector<size_t>{d})
        throw ShapeError("layer_norm: gamma/beta must be [d]");
    if (eps <= 0) throw ShapeError("layer_norm: eps must be positive");
    const size_t rows = x->numel() / d;
    const bool rec = tracked(tape, {&x, &gamma, &beta});
    Tensor out = output(x->shape, rec, "layer_norm");
    auto mean = std::make_shared<std::vector<double>>(rows);
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    kernels::layer_norm(x->values.data(), gamma->values.data(), beta->values.data(), eps,
                        out->values.data(), mean->data(), inv_std->data(), rows, d);
    check_finite(*out, "layer_norm");
    if (rec) {
        tape->record([x, gamma, beta, out, mean, inv_std, rows, d] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            gamma->ensure_grad();
            beta->ensure_grad();
            kernels::layer_norm_backward(x->values.data(), gamma->values.data(), mean->data(),
                                         inv_std->data(), out->grad.data(), x->grad.data(),
                                         gamma->grad.data(), beta->grad.data(), rows, d);
        });
    }
    return out;
}

Tensor softmax(Tape* tape, const Tensor& x) {
    if (x->shape.empty() || x->shape.back() == 0) throw ShapeError("softmax: empty last axis");
    const size_t d = x->shape.back();
    const size_t rows = x->numel() / d;
    const bool rec = tracked(tape, {&x});
    Tensor out = output(x->shape, rec, "softmax");
    kernels::softmax(x->values.data(), out->values.data(), rows, d);
    check_finite(*out, "softmax");
    if (rec) {
        tape->record([x, out, rows, d] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            kernels::softmax_backward(out->values.data(), out->grad.data(), x->grad.data(), rows,
                                      d);
        });
    }
    return out;
}

Tensor gelu(Tape* tape, const Tensor& x) {
    const bool rec = tracked(tape, {&x});
    Tensor out = output(x->shape, rec, "gelu");
    kernels::gelu(x->values.data(), out->values.data(), x->numel());
    check_finite(*out, "gelu");
    if (rec) {
        tape->record([x, out] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            if (testing::corrupt_gelu_backward) {
                std::vector<double> g(out->grad);
                for (double& v : g) v *= 1.01;
                kernels::gelu_backward(x->values.data(), g.data(), x->grad.data(), x->numel());
            } else {
                kernels::gelu_backward(x->values.data(), out->grad.data(), x->grad.data(),
                                       x->numel());
            }
        });
    }
    return out;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a->shape != b->shape)
        throw ShapeError("add: shape mismatch " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    const bool rec = tracked(tape, {&a, &b});
    Tensor out = output(a->shape, rec, "add");
    kernels::add(a->values.data(), b->values.data(), out->values.data(), a->numel());
    check_finite(*out, "add");
    if (rec) {
        tape->record([a, b, out] {
            if (out->grad.empty()) return;
            if (a->requires_grad) {
                a->ensure_grad();
                kernels::axpy(1.0, out->grad.data(), a->grad.data(), out->numel(), true);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                kernels::axpy(1.0, out->grad.data(), b->grad.data(), out->numel(), true);
            }
        });
    }
    return out;
}

Tensor scale(Tape* tape, const Tensor& x, double c) {
    const bool rec = tracked(tape, {&x});
    Tensor out = output(x->shape, rec, "scale");
    kernels::axpy(c, x->values.data(), out->values.data(), x->numel(), false);
    check_finite(*out, "scale");
    if (rec) {
        tape->record([x, out, c] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            kernels::axpy(c, out->grad.data(), x->grad.data(), out->numel(), true);
        });
    }
    return out;
}

Tensor gather(Tape* tape, const Tensor& x, std::shared_ptr<const std::vector<size_t>> idx,
              std::vector<size_t> out_shape) {
    if (shape_numel(out_shape) != idx->size())
        throw ShapeError("gather: index count does not match output shape");
    const bool rec = tracked(tape, {&x});
    Tensor out = output(std::move(out_shape), rec, "gather");
    kernels::gather(x->values.data(), idx->data(), out->values.data(), idx->size());
    if (rec) {
        tape->record([x, out, idx] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            kernels::scatter_add(out->grad.data(), idx->data(), x->grad.data(), idx->size());
        });
    }
    return out;
}

Tensor reshape(Tape* tape, const Tensor& x, std::vector<size_t> shape) {
    if (shape_numel(shape) != x->numel())
        throw ShapeError("reshape: " + shape_str(x->shape) + " -> " + shape_str(shape));
    auto idx = std::make_shared<std::vector<size_t>>(x->numel());
    for (size_t i = 0; i < idx->size(); ++i) (*idx)[i] = i;
    return gather(tape, x, idx, std::move(shape));
}

Tensor mse(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a->shape != b->shape)
        throw ShapeError("mse: shape mismatch " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    const bool rec = tracked(tape, {&a, &b});
    Tensor out = output({1}, rec, "mse");
    out->values[0] = kernels::mse(a->values.data(), b->values.data(), a->numel());
    check_finite(*out, "mse");
    if (rec) {
        tape->record([a, b, out] {
            if (out->grad.empty()) return;
            const double g = out->grad[0];
            const size_t n = a->numel();
            const double c = 2.0 * g / static_cast<double>(n);
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < n; ++i)
                    a->grad[i] += c * (a->values[i] - b->values[i]);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (size_t i = 0; i < n; ++i)
                    b->grad[i] -= c * (a->values[i] - b->values[i]);
            }
        });
    }
    return out;
}

Tensor sum(Tape* tape, const Tensor& x) {
    const bool rec = tracked(tape, {&x});
    Tensor out = output({1}, rec, "sum");
    out->values[0] = kernels::sum(x->values.data(), x->numel());
    check_finite(*out, "sum");
    if (rec) {
        tape->record([x, out] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            const double g = out->grad[0];
            for (size_t i = 0; i < x->numel(); ++i) x->grad[i] += g;
        });
    }
    return out;
}

namespace {

std::shared_ptr<std::vector<size_t>> head_split_idx(size_t batch, size_t t, size_t d,
                                                    size_t heads) {
    const size_t hd = d / heads;
    auto idx = std::make_shared<std::vector<size_t>>(batch * t * d);
    size_t o = 0;
    for (size_t b = 0; b < batch; ++b)
        for (size_t h = 0; h < heads; ++h)
            for (size_t tt = 0; tt < t; ++tt)
                for (size_t j = 0; j < hd; ++j) (*idx)[o++] = (b * t + tt) * d + h * hd + j;
    return idx;
}

std::shared_ptr<std::vector<size_t>> head_merge_idx(size_t batch, size_t t, size_t d,
                                                    size_t heads) {
    const size_t hd = d / heads;
    auto idx = std::make_shared<std::vector<size_t>>(batch * t * d);
    size_t o = 0;
    for (size_t b = 0; b < batch; ++b)
        for (size_t tt = 0; tt < t; ++tt)
            for (size_t h = 0; h < heads; ++h)
                for (size_t j = 0; j < hd; ++j)
                    (*idx)[o++] = ((b * heads + h) * t + tt) * hd + j;
    return idx;
}

}  // namespace

Tensor attention_batched(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v,
                         size_t heads, const Tensor& mask) {
    if (q->shape.size() != 3 || q->shape != k->shape || q->shape != v->shape)
        throw ShapeError("attention: q/k/v must share shape [B,t,d]");
    const size_t batch = q->shape[0], t = q->shape[1], d = q->shape[2];
    if (heads == 0 || d % heads != 0)
        throw ShapeError("attention: d=" + std::to_string(d) + " not divisible by heads=" +
                         std::to_string(heads));
    const size_t hd = d / heads;
    const auto split = head_split_idx(batch, t, d, heads);
    Tensor qh = gather(tape, q, split, {batch * heads, t, hd});
    Tensor kh = gather(tape, k, split, {batch * heads, t, hd});
    Tensor vh = gather(tape, v, split, {batch * heads, t, hd});
    Tensor scores = bmm(tape, qh, kh, /*transpose_b=*/true);
    scores = scale(tape, scores, 1.0 / std::sqrt(static_cast<double>(hd)));
    if (mask) {
        if (mask->shape != scores->shape)
            throw ShapeError("attention: mask shape " + shape_str(mask->shape) +
                             " does not match scores " + shape_str(scores->shape));
        scores = add(tape, scores, mask);
    }
    Tensor attn = softmax(tape, scores);
    Tensor ctx = bmm(tape, attn, vh, false);
    return gather(tape, ctx, head_merge_idx(batch, t, d, heads), {batch, t, d});
}

Tensor attention(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v, size_t heads) {
    if (q->shape.size() != 2) throw ShapeError("attention: expected [t,d]");
    const size_t t = q->shape[0], d = q->shape[1];
    Tensor q3 = reshape(tape, q, {1, t, d});
    Tensor k3 = reshape(tape, k, {1, t, d});
    Tensor v3 = reshape(tape, v, {1, t, d});
    Tensor out = attention_batched(tape, q3, k3, v3, heads, nullptr);
    return reshape(tape, out, {t, d});
}

Tensor window_partition(Tape* tape, const Tensor& x, size_t win) {
    if (x->shape.size() != 3) throw ShapeError("window_partition: expected [h,w,d]");
    const size_t h = x->shape[0], w = x->shape[1], d = x->shape[2];
    if (win == 0 || h % win != 0 || w % win != 0)
        throw ShapeError("window_partition: " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by win=" + std::to_string(win));
    const size_t gw = w / win;
    auto idx = std::make_shared<std::vector<size_t>>(x->numel());
    size_t o = 0;
    for (size_t wr = 0; wr < h / win; ++wr)
        for (size_t wc = 0; wc < gw; ++wc)
            for (size_t ir = 0; ir < win; ++ir)
                for (size_t ic = 0; ic < win; ++ic)
                    for (size_t j = 0; j < d; ++j)
                        (*idx)[o++] = ((wr * win + ir) * w + (wc * win + ic)) * d + j;
    return gather(tape, x, idx, {(h / win) * gw, win * win, d});
}

Tensor window_merge(Tape* tape, const Tensor& x, size_t h, size_t w, size_t win) {
    if (x->shape.size() != 3 || x->shape[1] != win * win)
        throw ShapeError("window_merge: expected [nw, win*win, d]");
    const size_t d = x->shape[2];
    if (win == 0 || h % win != 0 || w % win != 0 || x->shape[0] != (h / win) * (w / win))
        throw ShapeError("window_merge: window count does not tile " + std::to_string(h) + "x" +
                         std::to_string(w));
    const size_t gw = w / win;
    auto idx = std::make_shared<std::vector<size_t>>(x->numel());
    size_t o = 0;
    for (size_t r = 0; r < h; ++r)
        for (size_t c = 0; c < w; ++c)
            for (size_t j = 0; j < d; ++j) {
                const size_t widx = (r / win) * gw + (c / win);
                const size_t tok = (r % win) * win + (c % win);
                (*idx)[o++] = (widx * win * win + tok) * d + j;
            }
    return gather(tape, x, idx, {h, w, d});
}

Tensor normalize_power(Tape* tape, const Tensor& x) {
    if (x->shape.size() != 1) throw ShapeError("normalize_power: expected 1-D signal");
    const size_t n = x->numel();
    const double ss = kernels::sum_sq(x->values.data(), n);
    if (ss == 0.0) throw NumericError("normalize_power: zero vector (degenerate latent)");
    const double norm = std::sqrt(ss);
    const double s = std::sqrt(static_cast<double>(n)) / norm;
    const bool rec = tracked(tape, {&x});
    Tensor out = output(x->shape, rec, "normalize_power");
    kernels::axpy(s, x->values.data(), out->values.data(), n, false);
    check_finite(*out, "normalize_power");
    if (rec) {
        tape->record([x, out, s, ss] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            const size_t n = x->numel();
            double dot = 0.0;
            for (size_t i = 0; i < n; ++i) dot += out->grad[i] * x->values[i];
            const double c = dot / ss;
            for (size_t i = 0; i < n; ++i) x->grad[i] += s * (out->grad[i] - x->values[i] * c);
        });
    }
    return out;
}

Tensor add_constant(Tape* tape, const Tensor& x, const std::vector<double>& c) {
    if (c.size() != x->numel()) throw ShapeError("add_constant: size mismatch");
    const bool rec = tracked(tape, {&x});
    Tensor out = output(x->shape, rec, "add_constant");
    kernels::add(x->values.data(), c.data(), out->values.data(), x->numel());
    check_finite(*out, "add_constant");
    if (rec) {
        tape->record([x, out] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            kernels::axpy(1.0, out->grad.data(), x->grad.data(), out->numel(), true);
        });
    }
    return out;
}

double grad_check(const std::function<Tensor(Tape*)>& f, const std::vector<Tensor>& params,
                  double h) {
    if (h <= 0) throw ConfigError("grad_check: step must be positive");
    for (const Tensor& p : params) p->zero_grad();
    Tape tape;
    Tensor loss = f(&tape);
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const Tensor& p : params) {
        p->ensure_grad();
        analytic.push_back(p->grad);
    }
    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        for (size_t i = 0; i < p->numel(); ++i) {
            const double orig = p->values[i];
            p->values[i] = orig + h;
            const double lp = f(nullptr)->values[0];
            p->values[i] = orig - h;
            const double lm = f(nullptr)->values[0];
            p->values[i] = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            const double ana = analytic[pi][i];
            const double rel = std::abs(numeric - ana) / std::max(1.0, std::abs(ana));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace scomm
