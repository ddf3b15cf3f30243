#include "scomm/rng.hpp"

#include <cmath>
#include <numbers>

namespace scomm::rng {

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t hash_label(std::string_view label) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t derive_seed(uint64_t master, std::string_view label) {
    return mix64(hash_label(label) ^ mix64(master));
}

Stream Stream::derive(uint64_t seed, std::string_view label, uint64_t tag0, uint64_t tag1) {
    uint64_t h = hash_label(label);
    h = mix64(h ^ mix64(seed));
    h = mix64(h ^ mix64(tag0 + 0x52dce729ull));
    h = mix64(h ^ mix64(tag1 + 0x38b4da56ull));
    Stream s;
    s.state_ = h;
    return s;
}

uint64_t Stream::next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double Stream::next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double Stream::next_gaussian() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
}

uint64_t Stream::next_below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
}

std::vector<size_t> Stream::permutation(size_t n) {
    std::vector<size_t> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = i;
    for (size_t i = n; i > 1; --i) {
        size_t j = static_cast<size_t>(next_below(i));
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

}  // namespace scomm::rng
