#include "scomm/metrics.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "scomm/errors.hpp"
#include "scomm/kernels.hpp"
#include "scomm/ops.hpp"

namespace scomm {

double mse_value(const Tensor& a, const Tensor& b) {
    if (a->shape != b->shape)
        throw ShapeError("mse: shape mismatch " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    return kernels::mse(a->values.data(), b->values.data(), a->numel());
}

double psnr_from_mse(double mse, double max_value) {
    if (max_value <= 0) throw ConfigError("psnr: max_value must be positive");
    if (mse < 0) throw NumericError("psnr: negative mse");
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_value * max_value / mse);
}

double psnr(const Tensor& a, const Tensor& b, double max_value) {
    return psnr_from_mse(mse_value(a, b), max_value);
}

std::vector<MetricsRecord> evaluate(const ParameterSet& params, const ModelConfig& config,
                                    DecoderId which, const Dataset& test_set,
                                    const std::vector<double>& snr_list, uint64_t eval_seed) {
    if (test_set.size() == 0) throw ConfigError("evaluate: empty test set");
    std::vector<MetricsRecord> out;
    for (double snr : snr_list) {
        double mse_sum = 0.0;
        double psnr_sum = 0.0;
        for (size_t i = 0; i < test_set.size(); ++i) {
            const Tensor& img = test_set.images[i];
            const size_t h = img->shape[0], w = img->shape[1];
            Tensor x = encode(nullptr, img, params, config);
            x = normalize_power(nullptr, x);
            rng::Stream noise =
                rng::Stream::derive(eval_seed, "eval-noise", i, std::bit_cast<uint64_t>(snr));
            Tensor y = transmit(nullptr, x, snr, noise);
            Tensor rec = decode(nullptr, y, params, config, which, h, w, /*clamp_output=*/true);
            mse_sum += mse_value(img, rec);
            psnr_sum += psnr(img, rec);
        }
        MetricsRecord r;
        r.snr_db = snr;
        r.split = "test";
        r.mse = mse_sum / static_cast<double>(test_set.size());
        r.psnr_db = psnr_sum / static_cast<double>(test_set.size());
        out.push_back(r);
    }
    return out;
}

}  // namespace scomm
