#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace scomm::rng {

// SplitMix64 finalizer. Also used to mix values into stream labels.
uint64_t mix64(uint64_t x);

// FNV-1a over a byte string.
uint64_t hash_label(std::string_view label);

// Stable sub-seed for a named stream.
uint64_t derive_seed(uint64_t master, std::string_view label);

// Deterministic 64-bit stream. Streams are derived, never copied around
// implicitly: every consumer owns the stream it advances. Substreams come
// from derive(), which hashes a label plus up to two integer tags, so the
// same (seed, label, tags) always names the same stream on every platform.
class Stream {
  public:
    Stream() : state_(0) {}
    explicit Stream(uint64_t seed) : state_(mix64(seed ^ 0x6a09e667f3bcc908ull)) {}

    static Stream derive(uint64_t seed, std::string_view label, uint64_t tag0 = 0,
                         uint64_t tag1 = 0);

    uint64_t next_u64();

    // Uniform in (0, 1]; never returns 0 so log() is always safe.
    double next_unit();

    // Standard normal via Box-Muller; consumes two uniforms per pair and
    // caches the second draw.
    double next_gaussian();

    // Uniform integer in [0, n) by multiply-shift.
    uint64_t next_below(uint64_t n);

    // Fisher-Yates permutation of 0..n-1.
    std::vector<size_t> permutation(size_t n);

  private:
    uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace scomm::rng
