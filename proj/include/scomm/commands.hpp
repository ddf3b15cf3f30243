#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scomm/metrics.hpp"

namespace scomm {

// CSV schema: regimen,seed,phase,epoch,snr_db,split,mse,psnr_db.
// Train rows aggregate over sampled SNRs, so their snr_db prints as "mix".
std::string metrics_csv(const std::vector<MetricsRecord>& rows);
void write_text_file(const std::filesystem::path& path, const std::string& content);

struct TrainArgs {
    std::filesystem::path config;
    std::string regimen;  // empty: use the config's
    std::optional<uint64_t> seed;
    std::filesystem::path out_dir;
};
int cmd_train(const TrainArgs& args);

struct EvalArgs {
    std::filesystem::path config;
    std::filesystem::path checkpoint;
    int decoder = 2;
    std::string snr_list;  // comma list; empty: config's set
    std::string data;      // empty/"synth": config's test set; else a PPM dir
    std::filesystem::path out_csv = "eval.csv";
    std::optional<std::filesystem::path> dump_images;
    uint64_t eval_seed = 0;
};
int cmd_eval(const EvalArgs& args);

struct CompareArgs {
    std::filesystem::path config;
    size_t seeds = 1;
    std::filesystem::path out_dir;
};
int cmd_compare(const CompareArgs& args);

// Runs the per-op gradient checks plus two end-to-end pipeline checks on a
// 4x4 configuration; prints one line per check. inject_fault corrupts one
// backward rule to prove the harness catches it (expected exit 1).
int cmd_gradcheck(bool inject_fault);

}  // namespace scomm
