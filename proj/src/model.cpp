#include "scomm/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "scomm/errors.hpp"
#include "scomm/ops.hpp"
#include "scomm/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace scomm {

namespace {

const Tensor& P(const ParameterSet& params, const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw ConfigError("missing parameter: " + name);
    return it->second;
}

std::string stage_prefix(const std::string& root, size_t stage) {
    return root + ".stage" + std::to_string(stage) + ".";
}

std::string block_prefix(const std::string& root, size_t stage, size_t block) {
    return stage_prefix(root, stage) + "block" + std::to_string(block) + ".";
}

// Decoder stage s (1-based, execution order) runs at the dim of encoder
// stage S-s+1.
size_t decoder_dim(const ModelConfig& cfg, size_t stage) {
    return cfg.stage_dims[cfg.stages() - stage];
}

size_t decoder_heads(const ModelConfig& cfg, size_t stage) {
    return cfg.heads[cfg.stages() - stage];
}

}  // namespace

size_t ModelConfig::downsample_factor() const {
    size_t f = patch_size;
    for (size_t s = 1; s < stages(); ++s) f *= 2;
    return f;
}

size_t ModelConfig::symbols_per_token() const {
    const size_t f = downsample_factor();
    const uint64_t raw = 3ull * f * f * compression_ratio.num;
    if (compression_ratio.den == 0 || raw % compression_ratio.den != 0)
        throw ConfigError("model: 3*(downsample)^2*ratio is not an integer symbol width");
    const uint64_t c = raw / compression_ratio.den;
    if (c == 0) throw ConfigError("model: compression ratio yields zero symbols per token");
    return static_cast<size_t>(c);
}

size_t ModelConfig::symbol_count(size_t h, size_t w) const {
    const uint64_t raw = 3ull * h * w * compression_ratio.num;
    if (raw % compression_ratio.den != 0)
        throw ConfigError("model: 3*h*w*ratio is not an integer symbol count");
    return static_cast<size_t>(raw / compression_ratio.den);
}

void ModelConfig::validate() const {
    const size_t s = stages();
    if (s == 0) throw ConfigError("model: need at least one stage");
    if (encoder_depths.size() != s || hcd_depths.size() != s || lcd_depths.size() != s ||
        heads.size() != s)
        throw ConfigError("model: stage lists must all have length " + std::to_string(s));
    if (patch_size == 0 || window_size == 0 || mlp_ratio == 0)
        throw ConfigError("model: patch_size, window_size and mlp_ratio must be positive");
    for (size_t i = 0; i < s; ++i) {
        if (stage_dims[i] == 0) throw ConfigError("model: zero stage dim");
        if (heads[i] == 0 || stage_dims[i] % heads[i] != 0)
            throw ConfigError("model: stage dim " + std::to_string(stage_dims[i]) +
                              " not divisible by heads " + std::to_string(heads[i]));
        if (encoder_depths[i] == 0 || hcd_depths[i] == 0 || lcd_depths[i] == 0)
            throw ConfigError("model: stage depths must be >= 1");
    }
    if (compression_ratio.num == 0 || compression_ratio.den == 0)
        throw ConfigError("model: compression ratio must be a positive rational");
    symbols_per_token();
}

void ModelConfig::validate_extent(size_t h, size_t w) const {
    const size_t f = downsample_factor();
    if (h == 0 || w == 0 || h % f != 0 || w % f != 0)
        throw ConfigError("model: image " + std::to_string(h) + "x" + std::to_string(w) +
                          " not divisible by downsample factor " + std::to_string(f));
    size_t gh = h / patch_size, gw = w / patch_size;
    for (size_t s = 1; s <= stages(); ++s) {
        if (gh % window_size != 0 || gw % window_size != 0)
            throw ConfigError("model: stage " + std::to_string(s) + " grid " + std::to_string(gh) +
                              "x" + std::to_string(gw) + " not divisible by window " +
                              std::to_string(window_size));
        gh /= 2;
        gw /= 2;
    }
    symbol_count(h, w);
}

namespace {

void add_linear(std::vector<std::pair<std::string, std::vector<size_t>>>& out,
                const std::string& name, size_t in, size_t on) {
    out.emplace_back(name + ".w", std::vector<size_t>{in, on});
    out.emplace_back(name + ".b", std::vector<size_t>{on});
}

void add_norm(std::vector<std::pair<std::string, std::vector<size_t>>>& out,
              const std::string& name, size_t d) {
    out.emplace_back(name + ".w", std::vector<size_t>{d});
    out.emplace_back(name + ".b", std::vector<size_t>{d});
}

void add_block(std::vector<std::pair<std::string, std::vector<size_t>>>& out,
               const std::string& prefix, size_t d, size_t mlp_ratio) {
    add_norm(out, prefix + "ln1", d);
    add_linear(out, prefix + "qkv", d, 3 * d);
    add_linear(out, prefix + "proj", d, d);
    add_norm(out, prefix + "ln2", d);
    add_linear(out, prefix + "fc1", d, mlp_ratio * d);
    add_linear(out, prefix + "fc2", mlp_ratio * d, d);
}

void add_channel_coder(std::vector<std::pair<std::string, std::vector<size_t>>>& out,
                       const std::string& root, size_t deep_dim, size_t c_out, bool encoder) {
    const size_t layers = ModelConfig::channel_coder_layers;
    for (size_t l = 1; l <= layers; ++l) {
        size_t in = deep_dim, on = deep_dim;
        if (encoder && l == layers) on = c_out;
        if (!encoder && l == 1) in = c_out;
        add_linear(out, root + ".fc" + std::to_string(l), in, on);
    }
    if (encoder)
        add_linear(out, root + ".skip", deep_dim, c_out);
    else
        add_linear(out, root + ".skip", c_out, deep_dim);
}

std::vector<std::pair<std::string, std::vector<size_t>>> parameter_shapes(
    const ModelConfig& cfg) {
    std::vector<std::pair<std::string, std::vector<size_t>>> out;
    const size_t S = cfg.stages();
    const size_t patch_vals = 3 * cfg.patch_size * cfg.patch_size;
    const size_t deep = cfg.stage_dims[S - 1];
    const size_t c_out = cfg.symbols_per_token();

    add_linear(out, "enc.sem.stage1.embed", patch_vals, cfg.stage_dims[0]);
    for (size_t s = 1; s <= S; ++s) {
        if (s >= 2)
            add_linear(out, stage_prefix("enc.sem", s) + "merge", 4 * cfg.stage_dims[s - 2],
                       cfg.stage_dims[s - 1]);
        for (size_t b = 0; b < cfg.encoder_depths[s - 1]; ++b)
            add_block(out, block_prefix("enc.sem", s, b), cfg.stage_dims[s - 1], cfg.mlp_ratio);
    }
    add_channel_coder(out, "enc.chan", deep, c_out, true);

    for (DecoderId id : {DecoderId::hcd, DecoderId::lcd}) {
        const std::string root = id == DecoderId::hcd ? "dec1" : "dec2";
        const auto& depths = cfg.decoder_depths(id);
        add_channel_coder(out, root + ".chan", deep, c_out, false);
        for (size_t s = 1; s <= S; ++s) {
            const size_t d = decoder_dim(cfg, s);
            if (s >= 2)
                add_linear(out, stage_prefix(root + ".sem", s) + "split", decoder_dim(cfg, s - 1),
                           4 * d);
            for (size_t b = 0; b < depths[s - 1]; ++b)
                add_block(out, block_prefix(root + ".sem", s, b), d, cfg.mlp_ratio);
        }
        add_linear(out, root + ".sem.unembed", cfg.stage_dims[0], patch_vals);
    }
    return out;
}

bool is_norm_weight(const std::string& name) {
    return (name.find(".ln1.") != std::string::npos || name.find(".ln2.") != std::string::npos) &&
           name.ends_with(".w");
}

}  // namespace

ParameterSet build(const ModelConfig& config, uint64_t init_seed) {
    config.validate();
    ParameterSet params;
    for (const auto& [name, shape] : parameter_shapes(config)) {
        Tensor t = make_param(shape);
        if (is_norm_weight(name)) {
            std::fill(t->values.begin(), t->values.end(), 1.0);
        } else if (name.ends_with(".w")) {
            rng::Stream s = rng::Stream::derive(init_seed, name);
            constexpr double kSigma = 0.02;
            for (double& v : t->values) {
                const double z = std::clamp(s.next_gaussian(), -2.0, 2.0);
                v = kSigma * z;
            }
        }
        // biases and norm offsets stay zero
        auto [it, inserted] = params.emplace(name, std::move(t));
        if (!inserted) throw ConfigError("duplicate parameter name: " + name);
    }
    return params;
}

namespace {

Tensor linear(Tape* tape, const Tensor& x, const ParameterSet& params, const std::string& name) {
    return bias_add(tape, matmul(tape, x, P(params, name + ".w")), P(params, name + ".b"));
}

Tensor norm(Tape* tape, const Tensor& x, const ParameterSet& params, const std::string& name) {
    return layer_norm(tape, x, P(params, name + ".w"), P(params, name + ".b"));
}

std::shared_ptr<std::vector<size_t>> roll_idx(size_t gh, size_t gw, size_t d, size_t sr,
                                              size_t sc) {
    auto idx = std::make_shared<std::vector<size_t>>(gh * gw * d);
    size_t o = 0;
    for (size_t r = 0; r < gh; ++r)
        for (size_t c = 0; c < gw; ++c) {
            const size_t src = (((r + sr) % gh) * gw + ((c + sc) % gw)) * d;
            for (size_t j = 0; j < d; ++j) (*idx)[o++] = src + j;
        }
    return idx;
}

// Additive score mask for shifted windows: tokens from different wrap
// regions must not attend to each other.
Tensor shift_mask(size_t gh, size_t gw, size_t win, size_t shift, size_t heads) {
    const size_t nw = (gh / win) * (gw / win);
    const size_t t = win * win;
    auto region = [&](size_t coord, size_t extent) {
        if (coord < extent - win) return 0;
        if (coord < extent - shift) return 1;
        return 2;
    };
    std::vector<double> mask(nw * heads * t * t, 0.0);
    for (size_t wr = 0; wr < gh / win; ++wr)
        for (size_t wc = 0; wc < gw / win; ++wc) {
            const size_t widx = wr * (gw / win) + wc;
            std::vector<int> rid(t);
            for (size_t ir = 0; ir < win; ++ir)
                for (size_t ic = 0; ic < win; ++ic)
                    rid[ir * win + ic] = region(wr * win + ir, gh) * 3 + region(wc * win + ic, gw);
            for (size_t h = 0; h < heads; ++h)
                for (size_t i = 0; i < t; ++i)
                    for (size_t j = 0; j < t; ++j)
                        if (rid[i] != rid[j])
                            mask[(((widx * heads + h) * t) + i) * t + j] = -1e30;
        }
    return make_tensor({nw * heads, t, t}, std::move(mask));
}

Tensor transformer_block(Tape* tape, const Tensor& x, const ParameterSet& params,
                         const std::string& prefix, const ModelConfig& cfg, size_t gh, size_t gw,
                         size_t d, size_t heads, bool shifted) {
    const size_t win = cfg.window_size;
    const size_t n = gh * gw;
    const size_t shift = (shifted && gh > win && gw > win) ? win / 2 : 0;

    Tensor h1 = norm(tape, x, params, prefix + "ln1");
    Tensor grid = reshape(tape, h1, {gh, gw, d});
    if (shift > 0) grid = gather(tape, grid, roll_idx(gh, gw, d, shift, shift), {gh, gw, d});
    Tensor wins = window_partition(tape, grid, win);
    const size_t nw = wins->shape[0];
    const size_t t = win * win;

    Tensor qkv = linear(tape, reshape(tape, wins, {nw * t, d}), params, prefix + "qkv");
    qkv = reshape(tape, qkv, {nw, t, 3 * d});
    auto slice = [&](size_t part) {
        auto idx = std::make_shared<std::vector<size_t>>(nw * t * d);
        size_t o = 0;
        for (size_t b = 0; b < nw; ++b)
            for (size_t tt = 0; tt < t; ++tt)
                for (size_t j = 0; j < d; ++j)
                    (*idx)[o++] = (b * t + tt) * 3 * d + part * d + j;
        return gather(tape, qkv, idx, {nw, t, d});
    };
    Tensor mask = shift > 0 ? shift_mask(gh, gw, win, shift, heads) : nullptr;
    Tensor ctx = attention_batched(tape, slice(0), slice(1), slice(2), heads, mask);
    Tensor proj = linear(tape, reshape(tape, ctx, {nw * t, d}), params, prefix + "proj");
    Tensor merged = window_merge(tape, reshape(tape, proj, {nw, t, d}), gh, gw, win);
    if (shift > 0)
        merged = gather(tape, merged, roll_idx(gh, gw, d, gh - shift, gw - shift), {gh, gw, d});
    Tensor attn_out = add(tape, x, reshape(tape, merged, {n, d}));

    Tensor h2 = norm(tape, attn_out, params, prefix + "ln2");
    Tensor m = linear(tape, h2, params, prefix + "fc1");
    m = gelu(tape, m);
    m = linear(tape, m, params, prefix + "fc2");
    return add(tape, attn_out, m);
}

std::shared_ptr<std::vector<size_t>> patch_idx(size_t h, size_t w, size_t p) {
    auto idx = std::make_shared<std::vector<size_t>>(h * w * 3);
    const size_t gw = w / p;
    size_t o = 0;
    for (size_t gr = 0; gr < h / p; ++gr)
        for (size_t gc = 0; gc < gw; ++gc)
            for (size_t pr = 0; pr < p; ++pr)
                for (size_t pc = 0; pc < p; ++pc)
                    for (size_t ch = 0; ch < 3; ++ch)
                        (*idx)[o++] = ((gr * p + pr) * w + (gc * p + pc)) * 3 + ch;
    return idx;
}

std::shared_ptr<std::vector<size_t>> unpatch_idx(size_t h, size_t w, size_t p) {
    auto idx = std::make_shared<std::vector<size_t>>(h * w * 3);
    const size_t gw = w / p;
    const size_t pv = p * p * 3;
    size_t o = 0;
    for (size_t r = 0; r < h; ++r)
        for (size_t c = 0; c < w; ++c)
            for (size_t ch = 0; ch < 3; ++ch) {
                const size_t token = (r / p) * gw + (c / p);
                const size_t within = ((r % p) * p + (c % p)) * 3 + ch;
                (*idx)[o++] = token * pv + within;
            }
    return idx;
}

std::shared_ptr<std::vector<size_t>> merge_idx(size_t gh, size_t gw, size_t d) {
    auto idx = std::make_shared<std::vector<size_t>>(gh * gw * d);
    size_t o = 0;
    for (size_t r = 0; r < gh / 2; ++r)
        for (size_t c = 0; c < gw / 2; ++c)
            for (size_t q = 0; q < 4; ++q) {
                const size_t src = ((2 * r + q / 2) * gw + (2 * c + q % 2)) * d;
                for (size_t j = 0; j < d; ++j) (*idx)[o++] = src + j;
            }
    return idx;
}

std::shared_ptr<std::vector<size_t>> split_idx(size_t gh, size_t gw, size_t d_out) {
    // input: [gh*gw, 4*d_out]; output: [2gh*2gw, d_out]
    auto idx = std::make_shared<std::vector<size_t>>(gh * gw * 4 * d_out);
    size_t o = 0;
    for (size_t r = 0; r < 2 * gh; ++r)
        for (size_t c = 0; c < 2 * gw; ++c) {
            const size_t token = (r / 2) * gw + (c / 2);
            const size_t q = (r % 2) * 2 + (c % 2);
            for (size_t j = 0; j < d_out; ++j) (*idx)[o++] = token * 4 * d_out + q * d_out + j;
        }
    return idx;
}

Tensor channel_encoder(Tape* tape, const Tensor& x, const ParameterSet& params) {
    Tensor h = x;
    for (size_t l = 1; l < ModelConfig::channel_coder_layers; ++l)
        h = gelu(tape, linear(tape, h, params, "enc.chan.fc" + std::to_string(l)));
    Tensor out = linear(tape, h, params,
                        "enc.chan.fc" + std::to_string(ModelConfig::channel_coder_layers));
    Tensor skip = linear(tape, x, params, "enc.chan.skip");
    return add(tape, out, skip);
}

Tensor channel_decoder(Tape* tape, const Tensor& y, const ParameterSet& params,
                       const std::string& root) {
    Tensor h = y;
    for (size_t l = 1; l < ModelConfig::channel_coder_layers; ++l)
        h = gelu(tape, linear(tape, h, params, root + ".chan.fc" + std::to_string(l)));
    Tensor out = linear(tape, h, params,
                        root + ".chan.fc" + std::to_string(ModelConfig::channel_coder_layers));
    Tensor skip = linear(tape, y, params, root + ".chan.skip");
    return add(tape, out, skip);
}

}  // namespace

Tensor encode(Tape* tape, const Tensor& image, const ParameterSet& params,
              const ModelConfig& config) {
    config.validate();
    if (image->shape.size() != 3 || image->shape[2] != 3)
        throw ShapeError("encode: expected [h,w,3], got " + shape_str(image->shape));
    const size_t h = image->shape[0], w = image->shape[1];
    config.validate_extent(h, w);
    for (double v : image->values)
        if (v < 0.0 || v > 1.0) throw NumericError("encode: image values must lie in [0,1]");

    const size_t p = config.patch_size;
    size_t gh = h / p, gw = w / p;
    Tensor x = gather(tape, image, patch_idx(h, w, p), {gh * gw, 3 * p * p});
    x = linear(tape, x, params, "enc.sem.stage1.embed");
    for (size_t s = 1; s <= config.stages(); ++s) {
        const size_t d = config.stage_dims[s - 1];
        if (s >= 2) {
            const size_t d_prev = config.stage_dims[s - 2];
            x = gather(tape, x, merge_idx(gh, gw, d_prev), {gh / 2 * (gw / 2), 4 * d_prev});
            gh /= 2;
            gw /= 2;
            x = linear(tape, x, params, stage_prefix("enc.sem", s) + "merge");
        }
        for (size_t b = 0; b < config.encoder_depths[s - 1]; ++b)
            x = transformer_block(tape, x, params, block_prefix("enc.sem", s, b), config, gh, gw,
                                  d, config.heads[s - 1],
                                  config.shifted_windows && b % 2 == 1);
    }
    Tensor symbols = channel_encoder(tape, x, params);
    return reshape(tape, symbols, {symbols->numel()});
}

Tensor decode(Tape* tape, const Tensor& symbols, const ParameterSet& params,
              const ModelConfig& config, DecoderId which, size_t h, size_t w, bool clamp_output) {
    config.validate();
    config.validate_extent(h, w);
    if (clamp_output && tape)
        throw ConfigError("decode: clamping is evaluation-only, not differentiable");
    const size_t f = config.downsample_factor();
    const size_t tokens = (h / f) * (w / f);
    const size_t c_out = config.symbols_per_token();
    if (symbols->numel() != tokens * c_out)
        throw ShapeError("decode: expected " + std::to_string(tokens * c_out) + " symbols, got " +
                         std::to_string(symbols->numel()));
    const std::string root = which == DecoderId::hcd ? "dec1" : "dec2";
    const auto& depths = config.decoder_depths(which);

    Tensor x = reshape(tape, symbols, {tokens, c_out});
    x = channel_decoder(tape, x, params, root);
    size_t gh = h / f, gw = w / f;
    for (size_t s = 1; s <= config.stages(); ++s) {
        const size_t d = decoder_dim(config, s);
        if (s >= 2) {
            x = linear(tape, x, params, stage_prefix(root + ".sem", s) + "split");
            x = gather(tape, x, split_idx(gh, gw, d), {gh * 2 * (gw * 2), d});
            gh *= 2;
            gw *= 2;
        }
        for (size_t b = 0; b < depths[s - 1]; ++b)
            x = transformer_block(tape, x, params, block_prefix(root + ".sem", s, b), config, gh,
                                  gw, d, decoder_heads(config, s),
                                  config.shifted_windows && b % 2 == 1);
    }
    x = linear(tape, x, params, root + ".sem.unembed");
    Tensor image = gather(tape, x, unpatch_idx(h, w, config.patch_size), {h, w, 3});
    if (clamp_output) {
        Tensor clamped = make_tensor(image->shape);
        for (size_t i = 0; i < image->numel(); ++i)
            clamped->values[i] = std::clamp(image->values[i], 0.0, 1.0);
        return clamped;
    }
    return image;
}

void set_trainable(ParameterSet& params, const std::vector<std::string>& prefixes, bool flag) {
    for (const std::string& prefix : prefixes) {
        size_t matched = 0;
        for (auto& [name, p] : params) {
            if (name.rfind(prefix, 0) == 0) {
                p->trainable = flag;
                p->requires_grad = flag;
                ++matched;
            }
        }
        if (matched == 0)
            throw ConfigError("set_trainable: prefix '" + prefix + "' matches no parameter");
    }
}

std::vector<std::string> transfer_prefixes(const ModelConfig& config, DecoderId id) {
    const std::string root = id == DecoderId::hcd ? "dec1" : "dec2";
    const size_t S = config.stages();
    std::vector<std::string> out;
    if (S >= 2) out.push_back(stage_prefix(root + ".sem", S - 1));
    out.push_back(stage_prefix(root + ".sem", S));
    out.push_back(root + ".sem.unembed.");
    return out;
}

void transfer_stages(ParameterSet& params, const ModelConfig& config) {
    const size_t S = config.stages();
    for (size_t s = S >= 2 ? S - 2 : S - 1; s < S; ++s) {
        if (config.hcd_depths[s] != config.lcd_depths[s])
            throw ConfigError("transfer_stages: decoder depths differ at stage " +
                              std::to_string(s + 1) + "; trailing stages must match");
    }
    const auto src_prefixes = transfer_prefixes(config, DecoderId::hcd);
    for (const std::string& src_prefix : src_prefixes) {
        std::string dst_prefix = src_prefix;
        dst_prefix.replace(0, 4, "dec2");
        size_t matched = 0;
        for (auto& [name, src] : params) {
            if (name.rfind(src_prefix, 0) != 0) continue;
            std::string dst_name = name;
            dst_name.replace(0, 4, "dec2");
            const Tensor& dst = P(params, dst_name);
            if (dst->shape != src->shape)
                throw ShapeError("transfer_stages: shape mismatch at " + dst_name);
            dst->values = src->values;
            ++matched;
        }
        if (matched == 0)
            throw ConfigError("transfer_stages: prefix '" + src_prefix + "' matches nothing");
    }
}

size_t forward_flops(const ModelConfig& config, DecoderId which, size_t h, size_t w) {
    config.validate();
    config.validate_extent(h, w);
    const size_t S = config.stages();
    const size_t p = config.patch_size;
    const size_t t = config.window_size * config.window_size;
    const size_t deep = config.stage_dims[S - 1];
    const size_t c_out = config.symbols_per_token();
    auto block_flops = [&](size_t tokens, size_t d) {
        // qkv + proj + scores + context + mlp, multiply-adds x2
        return 2 * (tokens * d * (4 * d + 2 * t + 2 * config.mlp_ratio * d));
    };
    auto coder_flops = [&](size_t tokens) {
        return 2 * (tokens * ((ModelConfig::channel_coder_layers - 1) * deep * deep +
                              2 * deep * c_out));
    };
    size_t flops = 0;
    size_t gh = h / p, gw = w / p;
    flops += 2 * (gh * gw * 3 * p * p * config.stage_dims[0]);
    for (size_t s = 1; s <= S; ++s) {
        if (s >= 2) {
            const size_t d_prev = config.stage_dims[s - 2];
            gh /= 2;
            gw /= 2;
            flops += 2 * (gh * gw * 4 * d_prev * config.stage_dims[s - 1]);
        }
        flops += config.encoder_depths[s - 1] * block_flops(gh * gw, config.stage_dims[s - 1]);
    }
    flops += coder_flops(gh * gw);  // channel encoder
    flops += coder_flops(gh * gw);  // channel decoder
    const auto& depths = config.decoder_depths(which);
    for (size_t s = 1; s <= S; ++s) {
        const size_t d = decoder_dim(config, s);
        if (s >= 2) {
            flops += 2 * (gh * gw * decoder_dim(config, s - 1) * 4 * d);
            gh *= 2;
            gw *= 2;
        }
        flops += depths[s - 1] * block_flops(gh * gw, d);
    }
    flops += 2 * (gh * gw * config.stage_dims[0] * 3 * p * p);
    return flops;
}

void validate_against(const ParameterSet& params, const ModelConfig& config) {
    const auto expected = parameter_shapes(config);
    if (params.size() != expected.size())
        throw ConfigError("parameter set has " + std::to_string(params.size()) +
                          " tensors, config implies " + std::to_string(expected.size()));
    for (const auto& [name, shape] : expected) {
        auto it = params.find(name);
        if (it == params.end()) throw ConfigError("parameter set is missing " + name);
        if (it->second->shape != shape)
            throw ConfigError("parameter " + name + " has shape " +
                              shape_str(it->second->shape) + ", config implies " +
                              shape_str(shape));
    }
}

namespace {

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("checkpoint: truncated file");
    return v;
}

constexpr char kMagic[4] = {'S', 'C', 'K', 'D'};
constexpr uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path.string());
    out.write(kMagic, 4);
    write_raw(out, kVersion);
    write_raw(out, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        if (name.size() > 0xffff) throw IoError("save_checkpoint: parameter name too long");
        write_raw(out, static_cast<uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_raw(out, static_cast<uint8_t>(t->shape.size()));
        for (size_t e : t->shape) write_raw(out, static_cast<uint32_t>(e));
        write_raw(out, static_cast<uint8_t>(0));  // dtype tag: f32
        for (double v : t->values) write_raw(out, static_cast<float>(v));
    }
    if (!out) throw IoError("save_checkpoint: write failed for " + path.string());
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("load_checkpoint: bad magic in " + path.string());
    const auto version = read_raw<uint32_t>(in);
    if (version != kVersion)
        throw IoError("load_checkpoint: unsupported version " + std::to_string(version));
    const auto count = read_raw<uint32_t>(in);
    ParameterSet params;
    for (uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_raw<uint16_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw IoError("load_checkpoint: truncated name");
        const auto ndim = read_raw<uint8_t>(in);
        std::vector<size_t> shape(ndim);
        for (auto& e : shape) {
            const auto ext = read_raw<uint32_t>(in);
            if (ext == 0) throw IoError("load_checkpoint: zero extent in " + name);
            e = ext;
        }
        const auto dtype = read_raw<uint8_t>(in);
        if (dtype != 0) throw IoError("load_checkpoint: unknown dtype tag in " + name);
        Tensor t = make_param(shape);
        for (double& v : t->values) v = static_cast<double>(read_raw<float>(in));
        check_finite(*t, "load_checkpoint");
        auto [it, inserted] = params.emplace(std::move(name), std::move(t));
        if (!inserted) throw IoError("load_checkpoint: duplicate parameter name");
    }
    return params;
}

}  // namespace scomm
