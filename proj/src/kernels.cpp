#include "scomm/kernels.hpp"

#include <cmath>
#include <vector>

namespace scomm::kernels {

namespace {

constexpr double kGeluC0 = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC1 = 0.044715;

inline double gelu_one(double x) {
    const double t = std::tanh(kGeluC0 * (x + kGeluC1 * x * x * x));
    return 0.5 * x * (1.0 + t);
}

inline double gelu_grad_one(double x) {
    const double u = kGeluC0 * (x + kGeluC1 * x * x * x);
    const double t = std::tanh(u);
    const double sech2 = 1.0 - t * t;
    const double du = kGeluC0 * (1.0 + 3.0 * kGeluC1 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * sech2 * du;
}

}  // namespace

void bmm(const double* a, size_t a_stride, bool ta, const double* b, size_t b_stride, bool tb,
         double* c, size_t batch, size_t m, size_t k, size_t n, bool accumulate) {
#pragma omp parallel
    {
        std::vector<double> row(n);
#pragma omp for collapse(2)
        for (size_t bt = 0; bt < batch; ++bt) {
            for (size_t i = 0; i < m; ++i) {
                const double* ab = a + bt * a_stride;
                const double* bb = b + bt * b_stride;
                double* cr = c + (bt * m + i) * n;
                if (!ta && tb) {
                    // c[i][j] = dot(a row i, b row j)
                    const double* ar = ab + i * k;
                    for (size_t j = 0; j < n; ++j) {
                        const double* br = bb + j * k;
                        double s = 0.0;
                        for (size_t kk = 0; kk < k; ++kk) s += ar[kk] * br[kk];
                        cr[j] = accumulate ? cr[j] + s : s;
                    }
                } else {
                    for (size_t j = 0; j < n; ++j) row[j] = 0.0;
                    if (!ta) {
                        const double* ar = ab + i * k;
                        for (size_t kk = 0; kk < k; ++kk) {
                            const double av = ar[kk];
                            const double* br = bb + kk * n;
                            for (size_t j = 0; j < n; ++j) row[j] += av * br[j];
                        }
                    } else {
                        // a stored [k x m]
                        for (size_t kk = 0; kk < k; ++kk) {
                            const double av = ab[kk * m + i];
                            const double* br = bb + kk * n;
                            for (size_t j = 0; j < n; ++j) row[j] += av * br[j];
                        }
                    }
                    for (size_t j = 0; j < n; ++j) cr[j] = accumulate ? cr[j] + row[j] : row[j];
                }
            }
        }
    }
}

void gelu(const double* x, double* y, size_t n) {
#pragma omp parallel for if (n >= 2048)
    for (size_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void gelu_backward(const double* x, const double* g, double* dx, size_t n) {
#pragma omp parallel for if (n >= 2048)
    for (size_t i = 0; i < n; ++i) dx[i] += g[i] * gelu_grad_one(x[i]);
}

void layer_norm(const double* x, const double* gamma, const double* beta, double eps, double* y,
                double* mean, double* inv_std, size_t rows, size_t d) {
#pragma omp parallel for if (rows >= 16)
    for (size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * d;
        double* yr = y + r * d;
        double mu = 0.0;
        for (size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (size_t j = 0; j < d; ++j) {
            const double dev = xr[j] - mu;
            var += dev * dev;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        mean[r] = mu;
        inv_std[r] = inv;
        for (size_t j = 0; j < d; ++j) yr[j] = (xr[j] - mu) * inv * gamma[j] + beta[j];
    }
}

void layer_norm_backward(const double* x, const double* gamma, const double* mean,
                         const double* inv_std, const double* g, double* dx, double* dgamma,
                         double* dbeta, size_t rows, size_t d) {
#pragma omp parallel for if (rows >= 16)
    for (size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * d;
        const double* gr = g + r * d;
        double* dxr = dx + r * d;
        const double mu = mean[r];
        const double inv = inv_std[r];
        // With xhat = (x - mu) * inv:
        //   dx = inv * (gg - mean(gg) - xhat * mean(gg * xhat)), gg = g * gamma
        double s1 = 0.0;
        double s2 = 0.0;
        for (size_t j = 0; j < d; ++j) {
            const double gg = gr[j] * gamma[j];
            const double xh = (xr[j] - mu) * inv;
            s1 += gg;
            s2 += gg * xh;
        }
        const double dn = static_cast<double>(d);
        for (size_t j = 0; j < d; ++j) {
            const double gg = gr[j] * gamma[j];
            const double xh = (xr[j] - mu) * inv;
            dxr[j] += inv * (gg - s1 / dn - xh * s2 / dn);
        }
    }
    // Parameter grads reduce over rows; parallelize over columns so each
    // entry keeps one fixed accumulation order.
#pragma omp parallel for if (d >= 16)
    for (size_t j = 0; j < d; ++j) {
        double dg = 0.0;
        double db = 0.0;
        for (size_t r = 0; r < rows; ++r) {
            const double xh = (x[r * d + j] - mean[r]) * inv_std[r];
            dg += g[r * d + j] * xh;
            db += g[r * d + j];
        }
        dgamma[j] += dg;
        dbeta[j] += db;
    }
}

void softmax(const double* x, double* y, size_t rows, size_t d) {
#pragma omp parallel for if (rows >= 16)
    for (size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * d;
        double* yr = y + r * d;
        double mx = xr[0];
        for (size_t j = 1; j < d; ++j) mx = xr[j] > mx ? xr[j] : mx;
        double s = 0.0;
        for (size_t j = 0; j < d; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            s += yr[j];
        }
        const double inv = 1.0 / s;
        for (size_t j = 0; j < d; ++j) yr[j] *= inv;
    }
}

void softmax_backward(const double* y, const double* g, double* dx, size_t rows, size_t d) {
#pragma omp parallel for if (rows >= 16)
    for (size_t r = 0; r < rows; ++r) {
        const double* yr = y + r * d;
        const double* gr = g + r * d;
        double* dxr = dx + r * d;
        double dot = 0.0;
        for (size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
        for (size_t j = 0; j < d; ++j) dxr[j] += yr[j] * (gr[j] - dot);
    }
}

void gather(const double* in, const size_t* idx, double* out, size_t n) {
#pragma omp parallel for if (n >= 2048)
    for (size_t i = 0; i < n; ++i) out[i] = in[idx[i]];
}

void scatter_add(const double* g, const size_t* idx, double* din, size_t n) {
    // idx is injective, so every destination is touched at most once.
#pragma omp parallel for if (n >= 2048)
    for (size_t i = 0; i < n; ++i) din[idx[i]] += g[i];
}

void bias_add(const double* x, const double* b, double* y, size_t rows, size_t d) {
#pragma omp parallel for if (rows >= 16)
    for (size_t r = 0; r < rows; ++r) {
        for (size_t j = 0; j < d; ++j) y[r * d + j] = x[r * d + j] + b[j];
    }
}

void bias_add_backward(const double* g, double* dx, double* db, size_t rows, size_t d) {
#pragma omp parallel for if (rows * d >= 2048)
    for (size_t i = 0; i < rows * d; ++i) dx[i] += g[i];
#pragma omp parallel for if (d >= 16)
    for (size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (size_t r = 0; r < rows; ++r) s += g[r * d + j];
        db[j] += s;
    }
}

void add(const double* a, const double* b, double* y, size_t n) {
#pragma omp parallel for if (n >= 2048)
    for (size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void axpy(double alpha, const double* x, double* y, size_t n, bool accumulate) {
#pragma omp parallel for if (n >= 2048)
    for (size_t i = 0; i < n; ++i) y[i] = accumulate ? y[i] + alpha * x[i] : alpha * x[i];
}

double sum(const double* x, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double sum_sq(const double* x, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += x[i] * x[i];
    return s;
}

double mse(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(n);
}

namespace ref {

void bmm(const double* a, size_t a_stride, bool ta, const double* b, size_t b_stride, bool tb,
         double* c, size_t batch, size_t m, size_t k, size_t n, bool accumulate) {
    for (size_t bt = 0; bt < batch; ++bt) {
        const double* ab = a + bt * a_stride;
        const double* bb = b + bt * b_stride;
        double* cb = c + bt * m * n;
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (size_t kk = 0; kk < k; ++kk) {
                    const double av = ta ? ab[kk * m + i] : ab[i * k + kk];
                    const double bv = tb ? bb[j * k + kk] : bb[kk * n + j];
                    s += av * bv;
                }
                cb[i * n + j] = accumulate ? cb[i * n + j] + s : s;
            }
        }
    }
}

void gelu(const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void layer_norm(const double* x, const double* gamma, const double* beta, double eps, double* y,
                double* mean, double* inv_std, size_t rows, size_t d) {
    for (size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * d;
        double mu = 0.0;
        for (size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        mean[r] = mu;
        inv_std[r] = inv;
        for (size_t j = 0; j < d; ++j) y[r * d + j] = (xr[j] - mu) * inv * gamma[j] + beta[j];
    }
}

void softmax(const double* x, double* y, size_t rows, size_t d) {
    for (size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * d;
        double* yr = y + r * d;
        double mx = xr[0];
        for (size_t j = 1; j < d; ++j) mx = xr[j] > mx ? xr[j] : mx;
        double s = 0.0;
        for (size_t j = 0; j < d; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            s += yr[j];
        }
        const double inv = 1.0 / s;
        for (size_t j = 0; j < d; ++j) yr[j] *= inv;
    }
}

}  // namespace ref

}  // namespace scomm::kernels
