#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace scomm {

// Dense row-major 64-bit tensor. Values are written once by the op that
// produces the tensor and treated as immutable afterwards; grad is the
// reverse-mode accumulator, allocated lazily and summed with "+=".
struct TensorData {
    std::vector<size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    bool trainable = false;

    size_t numel() const { return values.size(); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), 0.0);
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    }
};

using Tensor = std::shared_ptr<TensorData>;

size_t shape_numel(const std::vector<size_t>& shape);
std::string shape_str(const std::vector<size_t>& shape);

Tensor make_tensor(std::vector<size_t> shape);
Tensor make_tensor(std::vector<size_t> shape, std::vector<double> values);
Tensor make_scalar(double v);
// Trainable leaf: requires_grad and trainable both set.
Tensor make_param(std::vector<size_t> shape);

// Throws NumericError if any value is NaN/Inf. Ops call this on outputs.
void check_finite(const TensorData& t, const char* where);

// Ordered record of backward rules for one forward pass. Ops append their
// rule when recording; backward() replays them once in reverse.
class Tape {
  public:
    void record(std::function<void()> rule) { records_.push_back(std::move(rule)); }
    size_t size() const { return records_.size(); }

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
    // requires_grad tensor reachable from the records. A tape can be
    // consumed exactly once.
    void backward(const Tensor& loss);

  private:
    std::vector<std::function<void()>> records_;
    bool consumed_ = false;
};

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a named tensor map. Tensors with trainable ==
// false are skipped entirely, so frozen parameters never move.
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {});

    void step(std::map<std::string, Tensor>& params);
    size_t step_count() const { return t_; }

    static void zero_grad(std::map<std::string, Tensor>& params);

  private:
    struct Moments {
        std::vector<double> m, v;
    };
    AdamConfig cfg_;
    std::map<std::string, Moments> state_;
    size_t t_ = 0;
};

namespace testing {
// Deliberately corrupts the gelu backward rule; the gradient-check negative
// control flips this on to prove the checker catches broken rules.
extern bool corrupt_gelu_backward;
}  // namespace testing

}  // namespace scomm
