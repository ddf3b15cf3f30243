#include "scomm/tensor.hpp"

#include <cmath>

#include "scomm/errors.hpp"

namespace scomm {

size_t shape_numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const std::vector<size_t>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor make_tensor(std::vector<size_t> shape) {
    auto t = std::make_shared<TensorData>();
    t->values.assign(shape_numel(shape), 0.0);
    t->shape = std::move(shape);
    return t;
}

Tensor make_tensor(std::vector<size_t> shape, std::vector<double> values) {
    if (shape_numel(shape) != values.size())
        throw ShapeError("make_tensor: " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    auto t = std::make_shared<TensorData>();
    t->shape = std::move(shape);
    t->values = std::move(values);
    check_finite(*t, "make_tensor");
    return t;
}

Tensor make_scalar(double v) { return make_tensor({1}, {v}); }

Tensor make_param(std::vector<size_t> shape) {
    auto t = make_tensor(std::move(shape));
    t->requires_grad = true;
    t->trainable = true;
    return t;
}

void check_finite(const TensorData& t, const char* where) {
    for (double v : t.values) {
        if (!std::isfinite(v))
            throw NumericError(std::string(where) + ": non-finite value in tensor " +
                               shape_str(t.shape));
    }
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) throw NumericError("Tape::backward: tape already consumed");
    if (loss->numel() != 1)
        throw ShapeError("Tape::backward: loss must be scalar, got " + shape_str(loss->shape));
    consumed_ = true;
    loss->ensure_grad();
    loss->grad[0] += 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

Adam::Adam(AdamConfig cfg) : cfg_(cfg) {
    if (cfg_.beta1 < 0 || cfg_.beta1 >= 1 || cfg_.beta2 < 0 || cfg_.beta2 >= 1)
        throw ConfigError("Adam: betas must lie in [0,1)");
    if (cfg_.lr <= 0) throw ConfigError("Adam: learning rate must be positive");
}

void Adam::step(std::map<std::string, Tensor>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : params) {
        if (!p->trainable) continue;
        auto& mom = state_[name];
        if (mom.m.empty()) {
            mom.m.assign(p->numel(), 0.0);
            mom.v.assign(p->numel(), 0.0);
        } else if (mom.m.size() != p->numel()) {
            throw ShapeError("Adam: moment shape drifted for " + name);
        }
        p->ensure_grad();
        const size_t n = p->numel();
        double* w = p->values.data();
        const double* g = p->grad.data();
        double* m = mom.m.data();
        double* v = mom.v.data();
#pragma omp parallel for if (n >= 4096)
        for (size_t i = 0; i < n; ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad(std::map<std::string, Tensor>& params) {
    for (auto& [name, p] : params) p->zero_grad();
}

namespace testing {
bool corrupt_gelu_backward = false;
}

}  // namespace scomm
