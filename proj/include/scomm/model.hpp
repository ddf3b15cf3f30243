#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scomm/tensor.hpp"

namespace scomm {

// Which decoder a forward pass runs through. Hcd is the deep variant
// (decoder 1), Lcd the shallow one (decoder 2).
enum class DecoderId { hcd = 1, lcd = 2 };

// Exact channel-use ratio, kept rational so symbol counts stay integral.
struct Ratio {
    uint64_t num = 1;
    uint64_t den = 16;
};

// Architecture hyperparameters. The stage lists must all have the same
// length; defaults describe the desk-scale four-stage model. Decoder depths
// are listed in decoder execution order: stage 1 works at the deepest
// embedding dim right after the channel decoder, the last stage at the
// finest resolution before the pixel head.
struct ModelConfig {
    size_t patch_size = 2;
    std::vector<size_t> stage_dims = {16, 32, 64, 128};
    std::vector<size_t> encoder_depths = {2, 2, 6, 2};
    std::vector<size_t> hcd_depths = {2, 6, 2, 2};
    std::vector<size_t> lcd_depths = {2, 2, 2, 2};
    std::vector<size_t> heads = {1, 2, 4, 4};
    size_t window_size = 2;
    bool shifted_windows = false;
    Ratio compression_ratio;
    size_t mlp_ratio = 2;

    static constexpr size_t channel_coder_layers = 7;

    size_t stages() const { return stage_dims.size(); }
    // Total spatial downsampling factor from pixels to the deepest grid.
    size_t downsample_factor() const;
    // Channel symbols per token at the deepest stage.
    size_t symbols_per_token() const;
    // Channel symbols for an h x w image: 3*h*w*ratio.
    size_t symbol_count(size_t h, size_t w) const;

    const std::vector<size_t>& decoder_depths(DecoderId id) const {
        return id == DecoderId::hcd ? hcd_depths : lcd_depths;
    }

    void validate() const;
    // Checks that an h x w image survives every stage: divisibility by the
    // downsample factor and by the window size at each grid.
    void validate_extent(size_t h, size_t w) const;
};

// Named, ordered parameter tensors of the encoder and both decoders. The
// map order (lexicographic) is the checkpoint order. Prefixes follow
// {enc|dec1|dec2}.{sem|chan}.stage{S}.block{B}.{sublayer}.{w|b}.
using ParameterSet = std::map<std::string, Tensor>;

// Builds encoder + both decoders; weights are truncated-normal(0, 0.02)
// clipped at two sigma, biases zero, layer-norm gamma one. Each tensor
// draws from a stream named by the parameter itself, so the result is a
// pure function of (config, seed).
ParameterSet build(const ModelConfig& config, uint64_t init_seed);

// Semantic encoder (patch embed + windowed transformer stages with patch
// merging) followed by the per-token channel encoder. Output is the flat
// symbol vector of length symbol_count(h, w).
Tensor encode(Tape* tape, const Tensor& image, const ParameterSet& params,
              const ModelConfig& config);

// Channel decoder + semantic decoder with patch splitting, producing an
// [h,w,3] reconstruction. Unclamped by default; pass clamp_output=true for
// metric evaluation.
Tensor decode(Tape* tape, const Tensor& symbols, const ParameterSet& params,
              const ModelConfig& config, DecoderId which, size_t h, size_t w,
              bool clamp_output = false);

// Flips trainable/requires_grad for every parameter matching one of the
// name prefixes. A prefix that matches nothing signals a naming bug and
// throws.
void set_trainable(ParameterSet& params, const std::vector<std::string>& prefixes, bool flag);

// The parameter-name prefixes copied by transfer_stages: the trailing
// decoder stages that are architecturally identical between the two
// variants, plus the pixel head.
std::vector<std::string> transfer_prefixes(const ModelConfig& config, DecoderId id);

// Copies dec1's trailing stages + pixel head into dec2 (deep copy; later
// updates to either side do not alias).
void transfer_stages(ParameterSet& params, const ModelConfig& config);

// Closed-form forward multiply-add count for one image through encoder +
// the given decoder.
size_t forward_flops(const ModelConfig& config, DecoderId which, size_t h, size_t w);

// Checks that a parameter set carries exactly the names and shapes the
// config implies (e.g. a freshly loaded checkpoint).
void validate_against(const ParameterSet& params, const ModelConfig& config);

// Binary checkpoint: magic "SCKD", version, count, then per parameter the
// name, extents and 32-bit little-endian values in map order.
void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
ParameterSet load_checkpoint(const std::filesystem::path& path);

}  // namespace scomm
