#pragma once

#include <filesystem>
#include <string>

#include "scomm/channel.hpp"
#include "scomm/data.hpp"
#include "scomm/model.hpp"
#include "scomm/training.hpp"

namespace scomm {

// Shortest round-trip decimal formatting ('.' separator, never localized);
// infinities print as "inf"/"-inf".
std::string fmt_double(double v);

// Where the images come from. "synth" generates disjoint train/test images
// from one seed; "dir" reads PPM files (train_dir/test_dir, center-cropped
// to extent, at most n_train/n_test files).
struct DataSpec {
    std::string source = "synth";
    std::string train_dir;
    std::string test_dir;
    size_t n_train = 64;
    size_t n_test = 16;
    size_t extent = 32;
    uint64_t seed = 1234;
};

// Flat INI-style experiment file: sections [model] [channel] [train] [data],
// `key = value` lines, '#' comments. Unknown sections or keys are rejected;
// omitted keys keep their defaults.
struct ExperimentConfig {
    ModelConfig model;
    ChannelConfig channel;
    TrainConfig train;
    DataSpec data;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::filesystem::path& path);

// Canonical dump: fixed section and key order, normalized values. Parsing
// the dump reproduces the same config (and the same dump).
std::string dump_canonical(const ExperimentConfig& config);

Dataset make_train_dataset(const DataSpec& spec);
Dataset make_test_dataset(const DataSpec& spec);

}  // namespace scomm
