#include "scomm/channel.hpp"

#include <cmath>
#include <limits>

#include "scomm/errors.hpp"
#include "scomm/ops.hpp"

namespace scomm {

void ChannelConfig::validate() const {
    if (snr_set_db.empty()) throw ConfigError("channel: snr_set_db must not be empty");
    for (double s : snr_set_db)
        if (!std::isfinite(s)) throw ConfigError("channel: snr_set_db values must be finite");
}

double snr_to_sigma2(double snr_db) {
    if (snr_db == std::numeric_limits<double>::infinity()) return 0.0;
    if (!std::isfinite(snr_db)) throw ConfigError("snr_to_sigma2: snr must be finite or +inf");
    return std::pow(10.0, -snr_db / 10.0);
}

double sample_snr(const ChannelConfig& config, rng::Stream& stream) {
    config.validate();
    return config.snr_set_db[stream.next_below(config.snr_set_db.size())];
}

NoiseDraw draw_noise(double snr_db, size_t n, rng::Stream& stream) {
    NoiseDraw draw;
    draw.snr_db = snr_db;
    draw.sigma2 = snr_to_sigma2(snr_db);
    draw.sample.resize(n);
    const double sigma = std::sqrt(draw.sigma2);
    for (size_t i = 0; i < n; ++i) draw.sample[i] = sigma * stream.next_gaussian();
    return draw;
}

Tensor transmit(Tape* tape, const Tensor& x, double snr_db, rng::Stream& stream) {
    const NoiseDraw draw = draw_noise(snr_db, x->numel(), stream);
    return add_constant(tape, x, draw.sample);
}

}  // namespace scomm
