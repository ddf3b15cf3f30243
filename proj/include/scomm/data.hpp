#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "scomm/rng.hpp"
#include "scomm/tensor.hpp"

namespace scomm {

// Ordered image corpus. Images are [h,w,3] tensors with values in [0,1];
// the order is part of the contract and never depends on filesystem
// enumeration order.
struct Dataset {
    std::vector<Tensor> images;
    std::string split;
    std::string source;

    size_t size() const { return images.size(); }
};

// Binary PPM (P6, maxval 255) in row-major RGB.
Tensor read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Tensor& image);

// Reads every *.ppm file in lexicographic filename order, center-crops to
// crop x crop and scales to [0,1]. limit == 0 means no limit.
Dataset load_ppm_dir(const std::filesystem::path& path, size_t crop, size_t limit);

// Deterministic synthetic images: per image a seeded mixture of a smooth
// random cosine field, an axis gradient and a checkerboard, min-max
// normalized to [0,1]. index_offset shifts the per-image substreams so
// disjoint splits can share one seed.
Dataset synth_dataset(size_t n, size_t extent, uint64_t seed, size_t index_offset = 0);

// Epoch-wise shuffled batches; the final short batch is kept.
std::vector<std::vector<size_t>> batches(const Dataset& dataset, size_t batch_size,
                                         rng::Stream& shuffle);

}  // namespace scomm
