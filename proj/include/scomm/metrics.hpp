#pragma once

#include <string>
#include <vector>

#include "scomm/channel.hpp"
#include "scomm/data.hpp"
#include "scomm/model.hpp"

namespace scomm {

// One evaluation row; serializes to the CSV schema
// regimen,seed,phase,epoch,snr_db,split,mse,psnr_db.
struct MetricsRecord {
    std::string regimen;
    uint64_t seed = 0;
    int phase = 0;
    size_t epoch = 0;
    double snr_db = 0.0;
    std::string split;
    double mse = 0.0;
    double psnr_db = 0.0;
};

// 10 * log10(max^2 / mse). Returns +infinity for mse == 0 (serialized as
// "inf").
double psnr(const Tensor& a, const Tensor& b, double max_value = 1.0);
double mse_value(const Tensor& a, const Tensor& b);
double psnr_from_mse(double mse, double max_value = 1.0);

// Full sweep: for each SNR, encode/transmit/decode every test image with a
// noise stream fixed per (image index, snr), clamp, and average MSE and
// per-image PSNR over the set.
std::vector<MetricsRecord> evaluate(const ParameterSet& params, const ModelConfig& config,
                                    DecoderId which, const Dataset& test_set,
                                    const std::vector<double>& snr_list, uint64_t eval_seed);

}  // namespace scomm
