#include "scomm/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "scomm/errors.hpp"

namespace scomm {

std::string fmt_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
    return out;
}

size_t parse_usize(const std::string& key, const std::string& v) {
    return static_cast<size_t>(parse_u64(key, v));
}

double parse_double(const std::string& key, const std::string& v) {
    if (v == "inf") return std::numeric_limits<double>::infinity();
    double out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("config: bad bool for " + key + ": '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(v);
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

std::vector<size_t> parse_usize_list(const std::string& key, const std::string& v) {
    std::vector<size_t> out;
    for (const auto& item : split_list(v)) out.push_back(parse_usize(key, item));
    if (out.empty()) throw ConfigError("config: empty list for " + key);
    return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(parse_double(key, item));
    if (out.empty()) throw ConfigError("config: empty list for " + key);
    return out;
}

Ratio parse_ratio(const std::string& key, const std::string& v) {
    const size_t slash = v.find('/');
    Ratio r;
    if (slash == std::string::npos) {
        r.num = parse_u64(key, v);
        r.den = 1;
    } else {
        r.num = parse_u64(key, trim(v.substr(0, slash)));
        r.den = parse_u64(key, trim(v.substr(slash + 1)));
    }
    if (r.den == 0) throw ConfigError("config: zero denominator in " + key);
    return r;
}

std::string join_usize(const std::vector<size_t>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

std::string join_double(const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += fmt_double(v[i]);
    }
    return s;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::string section;
    std::stringstream ss(text);
    std::string raw;
    size_t lineno = 0;
    while (std::getline(ss, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": bad section");
            section = line.substr(1, line.size() - 2);
            if (section != "model" && section != "channel" && section != "train" &&
                section != "data")
                throw ConfigError("config: unknown section [" + section + "]");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("config: key '" + key + "' outside any section");
        const std::string q = section + "." + key;

        if (section == "model") {
            if (key == "patch_size") cfg.model.patch_size = parse_usize(q, value);
            else if (key == "stage_dims") cfg.model.stage_dims = parse_usize_list(q, value);
            else if (key == "encoder_depths") cfg.model.encoder_depths = parse_usize_list(q, value);
            else if (key == "hcd_depths") cfg.model.hcd_depths = parse_usize_list(q, value);
            else if (key == "lcd_depths") cfg.model.lcd_depths = parse_usize_list(q, value);
            else if (key == "heads") cfg.model.heads = parse_usize_list(q, value);
            else if (key == "window_size") cfg.model.window_size = parse_usize(q, value);
            else if (key == "shifted_windows") cfg.model.shifted_windows = parse_bool(q, value);
            else if (key == "compression_ratio") cfg.model.compression_ratio = parse_ratio(q, value);
            else if (key == "mlp_ratio") cfg.model.mlp_ratio = parse_usize(q, value);
            else throw ConfigError("config: unknown key " + q);
        } else if (section == "channel") {
            if (key == "snr_set_db") cfg.channel.snr_set_db = parse_double_list(q, value);
            else if (key == "noise_seed") {
                if (value == "auto") cfg.channel.noise_seed.reset();
                else cfg.channel.noise_seed = parse_u64(q, value);
            } else throw ConfigError("config: unknown key " + q);
        } else if (section == "train") {
            if (key == "regimen") {
                auto r = parse_regimen(value);
                if (!r) throw ConfigError("config: unknown regimen '" + value + "'");
                cfg.train.regimen = *r;
            } else if (key == "epochs") cfg.train.epochs = parse_usize(q, value);
            else if (key == "learning_rate") cfg.train.learning_rate = parse_double(q, value);
            else if (key == "batch_size") cfg.train.batch_size = parse_usize(q, value);
            else if (key == "alpha") cfg.train.alpha = parse_double(q, value);
            else if (key == "master_seed") cfg.train.master_seed = parse_u64(q, value);
            else throw ConfigError("config: unknown key " + q);
        } else {  // data
            if (key == "source") {
                if (value != "synth" && value != "dir")
                    throw ConfigError("config: data.source must be synth or dir");
                cfg.data.source = value;
            } else if (key == "train_dir") cfg.data.train_dir = value;
            else if (key == "test_dir") cfg.data.test_dir = value;
            else if (key == "n_train") cfg.data.n_train = parse_usize(q, value);
            else if (key == "n_test") cfg.data.n_test = parse_usize(q, value);
            else if (key == "extent") cfg.data.extent = parse_usize(q, value);
            else if (key == "seed") cfg.data.seed = parse_u64(q, value);
            else throw ConfigError("config: unknown key " + q);
        }
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string dump_canonical(const ExperimentConfig& c) {
    std::string out;
    out += "[model]\n";
    out += "patch_size = " + std::to_string(c.model.patch_size) + "\n";
    out += "stage_dims = " + join_usize(c.model.stage_dims) + "\n";
    out += "encoder_depths = " + join_usize(c.model.encoder_depths) + "\n";
    out += "hcd_depths = " + join_usize(c.model.hcd_depths) + "\n";
    out += "lcd_depths = " + join_usize(c.model.lcd_depths) + "\n";
    out += "heads = " + join_usize(c.model.heads) + "\n";
    out += "window_size = " + std::to_string(c.model.window_size) + "\n";
    out += std::string("shifted_windows = ") + (c.model.shifted_windows ? "true" : "false") + "\n";
    out += "compression_ratio = " + std::to_string(c.model.compression_ratio.num) + "/" +
           std::to_string(c.model.compression_ratio.den) + "\n";
    out += "mlp_ratio = " + std::to_string(c.model.mlp_ratio) + "\n";
    out += "\n[channel]\n";
    out += "snr_set_db = " + join_double(c.channel.snr_set_db) + "\n";
    out += "noise_seed = " +
           (c.channel.noise_seed ? std::to_string(*c.channel.noise_seed) : std::string("auto")) +
           "\n";
    out += "\n[train]\n";
    out += "regimen = " + regimen_name(c.train.regimen) + "\n";
    out += "epochs = " + std::to_string(c.train.epochs) + "\n";
    out += "learning_rate = " + fmt_double(c.train.learning_rate) + "\n";
    out += "batch_size = " + std::to_string(c.train.batch_size) + "\n";
    out += "alpha = " + fmt_double(c.train.alpha) + "\n";
    out += "master_seed = " + std::to_string(c.train.master_seed) + "\n";
    out += "\n[data]\n";
    out += "source = " + c.data.source + "\n";
    out += "train_dir = " + c.data.train_dir + "\n";
    out += "test_dir = " + c.data.test_dir + "\n";
    out += "n_train = " + std::to_string(c.data.n_train) + "\n";
    out += "n_test = " + std::to_string(c.data.n_test) + "\n";
    out += "extent = " + std::to_string(c.data.extent) + "\n";
    out += "seed = " + std::to_string(c.data.seed) + "\n";
    return out;
}

Dataset make_train_dataset(const DataSpec& spec) {
    Dataset ds;
    if (spec.source == "synth") {
        ds = synth_dataset(spec.n_train, spec.extent, spec.seed, 0);
    } else {
        ds = load_ppm_dir(spec.train_dir, spec.extent, spec.n_train);
    }
    ds.split = "train";
    return ds;
}

Dataset make_test_dataset(const DataSpec& spec) {
    Dataset ds;
    if (spec.source == "synth") {
        ds = synth_dataset(spec.n_test, spec.extent, spec.seed, spec.n_train);
    } else {
        ds = load_ppm_dir(spec.test_dir, spec.extent, spec.n_test);
    }
    ds.split = "test";
    return ds;
}

}  // namespace scomm
