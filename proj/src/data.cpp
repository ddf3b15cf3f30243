#include "scomm/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>

#include "scomm/errors.hpp"

namespace scomm {

namespace {

// Reads one whitespace-delimited token, skipping '#' comments per the PPM
// grammar.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

}  // namespace

Tensor read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_ppm: cannot open " + path.string());
    if (next_token(in) != "P6") throw IoError("read_ppm: not a P6 file: " + path.string());
    size_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoul(next_token(in));
        h = std::stoul(next_token(in));
        maxval = std::stoul(next_token(in));
    } catch (const std::exception&) {
        throw IoError("read_ppm: malformed header in " + path.string());
    }
    if (w == 0 || h == 0) throw IoError("read_ppm: bad dimensions in " + path.string());
    if (maxval != 255) throw IoError("read_ppm: maxval must be 255 in " + path.string());
    // The token reader already consumed the single whitespace after maxval.
    std::vector<unsigned char> raw(w * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw IoError("read_ppm: truncated pixel data in " + path.string());
    std::vector<double> vals(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) vals[i] = static_cast<double>(raw[i]) / 255.0;
    return make_tensor({h, w, 3}, std::move(vals));
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
    if (image->shape.size() != 3 || image->shape[2] != 3)
        throw ShapeError("write_ppm: expected [h,w,3], got " + shape_str(image->shape));
    const size_t h = image->shape[0], w = image->shape[1];
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_ppm: cannot open " + path.string());
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(image->numel());
    for (size_t i = 0; i < raw.size(); ++i) {
        const double v = std::clamp(image->values[i], 0.0, 1.0);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write_ppm: write failed for " + path.string());
}

Dataset load_ppm_dir(const std::filesystem::path& path, size_t crop, size_t limit) {
    if (!std::filesystem::is_directory(path))
        throw IoError("load_ppm_dir: not a directory: " + path.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ppm")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    if (limit > 0 && files.size() > limit) files.resize(limit);
    Dataset ds;
    ds.source = path.string();
    for (const auto& f : files) {
        Tensor img = read_ppm(f);
        const size_t h = img->shape[0], w = img->shape[1];
        if (h < crop || w < crop)
            throw IoError("load_ppm_dir: " + f.string() + " is smaller than crop " +
                          std::to_string(crop));
        const size_t r0 = (h - crop) / 2, c0 = (w - crop) / 2;
        std::vector<double> vals(crop * crop * 3);
        for (size_t r = 0; r < crop; ++r)
            for (size_t c = 0; c < crop; ++c)
                for (size_t ch = 0; ch < 3; ++ch)
                    vals[(r * crop + c) * 3 + ch] =
                        img->values[((r0 + r) * w + (c0 + c)) * 3 + ch];
        ds.images.push_back(make_tensor({crop, crop, 3}, std::move(vals)));
    }
    return ds;
}

Dataset synth_dataset(size_t n, size_t extent, uint64_t seed, size_t index_offset) {
    if (n == 0) throw ConfigError("synth_dataset: n must be >= 1");
    if (extent == 0) throw ConfigError("synth_dataset: extent must be >= 1");
    Dataset ds;
    ds.source = "synth";
    const double ext = static_cast<double>(extent);
    for (size_t img = 0; img < n; ++img) {
        rng::Stream s = rng::Stream::derive(seed, "synth-image", index_offset + img);
        // Smooth field: a handful of low-frequency cosine waves per channel.
        constexpr size_t kWaves = 6;
        struct Wave {
            double u, v, phase, amp;
        };
        std::vector<std::array<Wave, kWaves>> waves(3);
        for (size_t ch = 0; ch < 3; ++ch)
            for (size_t k = 0; k < kWaves; ++k) {
                Wave& wv = waves[ch][k];
                wv.u = (s.next_unit() * 4.0 - 2.0) / ext;
                wv.v = (s.next_unit() * 4.0 - 2.0) / ext;
                wv.phase = s.next_unit() * 2.0 * std::numbers::pi;
                wv.amp = 0.5 + s.next_unit();
            }
        const double grad_gx = s.next_unit() * 2.0 - 1.0;
        const double grad_gy = s.next_unit() * 2.0 - 1.0;
        const double grad_amp = 0.5 + s.next_unit();
        const size_t cell = 2 + static_cast<size_t>(s.next_below(static_cast<uint64_t>(
                                    std::max<size_t>(2, extent / 4))));
        const double check_amp = 0.25 + 0.5 * s.next_unit();
        std::vector<double> vals(extent * extent * 3);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (size_t r = 0; r < extent; ++r)
            for (size_t c = 0; c < extent; ++c) {
                const double x = static_cast<double>(c);
                const double y = static_cast<double>(r);
                const double checker = (((r / cell) + (c / cell)) % 2 == 0) ? 1.0 : -1.0;
                for (size_t ch = 0; ch < 3; ++ch) {
                    double v = 0.0;
                    for (const Wave& wv : waves[ch])
                        v += wv.amp *
                             std::cos(2.0 * std::numbers::pi * (wv.u * x + wv.v * y) + wv.phase);
                    v += grad_amp * (grad_gx * x + grad_gy * y) / ext;
                    v += check_amp * checker;
                    vals[(r * extent + c) * 3 + ch] = v;
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
        const double span = hi > lo ? hi - lo : 1.0;
        for (double& v : vals) v = (v - lo) / span;
        ds.images.push_back(make_tensor({extent, extent, 3}, std::move(vals)));
    }
    return ds;
}

std::vector<std::vector<size_t>> batches(const Dataset& dataset, size_t batch_size,
                                         rng::Stream& shuffle) {
    if (dataset.size() == 0) throw ConfigError("batches: empty dataset");
    if (batch_size == 0) throw ConfigError("batches: batch_size must be >= 1");
    const std::vector<size_t> perm = shuffle.permutation(dataset.size());
    std::vector<std::vector<size_t>> out;
    for (size_t i = 0; i < perm.size(); i += batch_size) {
        const size_t end = std::min(i + batch_size, perm.size());
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

}  // namespace scomm
