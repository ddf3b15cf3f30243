#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "scomm/rng.hpp"
#include "scomm/tensor.hpp"

namespace scomm {

// AWGN channel model. The transmitted signal is real-valued with unit
// average power enforced by normalize_power, so a target SNR of s dB maps to
// a per-component noise variance of 10^(-s/10). The complex-symbol view
// (pairs of reals, variance sigma^2/2 per complex component) carries the
// same SNR; real modeling keeps the arithmetic simple.
struct ChannelConfig {
    std::vector<double> snr_set_db = {1.0, 3.0, 5.0, 7.0};
    // Noise stream seed; unset means "derive from the training master seed",
    // which keeps data order and init untouched when only this changes.
    std::optional<uint64_t> noise_seed;

    void validate() const;
};

// One sampled corruption: the SNR it was drawn at, the variance it implies,
// and the realized noise vector.
struct NoiseDraw {
    double snr_db = 0.0;
    double sigma2 = 0.0;
    std::vector<double> sample;
};

// 10^(-snr_db/10). +infinity maps to 0 (noiseless evaluation sentinel).
double snr_to_sigma2(double snr_db);

// Uniform draw over the configured SNR set; one per training batch.
double sample_snr(const ChannelConfig& config, rng::Stream& stream);

NoiseDraw draw_noise(double snr_db, size_t n, rng::Stream& stream);

// Y = X + N. X must already be unit-power normalized. The noise is a
// constant in the graph, so gradients pass through unchanged.
Tensor transmit(Tape* tape, const Tensor& x, double snr_db, rng::Stream& stream);

}  // namespace scomm
