#include <CLI11.hpp>
#include <iostream>

#include "scomm/commands.hpp"
#include "scomm/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"multi-user joint source-channel image coding testbed"};
    app.require_subcommand(1);

    scomm::TrainArgs train_args;
    auto* train = app.add_subcommand("train", "run one training regimen end-to-end");
    train->add_option("--config", train_args.config, "experiment config file")->required();
    train->add_option("--regimen", train_args.regimen,
                      "alone | iterative | proposed | proposed+transfer | "
                      "proposed+transfer-frozen | proposed+kd (default: config)");
    uint64_t seed_flag = 0;
    auto* seed_opt = train->add_option("--seed", seed_flag, "master seed (default: config)");
    train->add_option("--out", train_args.out_dir, "output directory")->required();

    scomm::EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint over an SNR sweep");
    eval->add_option("--config", eval_args.config, "experiment config file")->required();
    eval->add_option("--ckpt", eval_args.checkpoint, "checkpoint file")->required();
    eval->add_option("--decoder", eval_args.decoder, "decoder id: 1 (hcd) or 2 (lcd)");
    eval->add_option("--snr", eval_args.snr_list, "comma list of SNR dB values, 'inf' allowed");
    eval->add_option("--data", eval_args.data, "'synth' (config-driven) or a PPM directory");
    eval->add_option("--out", eval_args.out_csv, "metrics CSV path (default eval.csv)");
    std::string dump_dir;
    eval->add_option("--dump-images", dump_dir, "write reconstructed PPMs here");
    eval->add_option("--eval-seed", eval_args.eval_seed, "evaluation noise seed");

    scomm::CompareArgs compare_args;
    auto* compare = app.add_subcommand("compare", "run all regimens x seeds and aggregate");
    compare->add_option("--config", compare_args.config, "experiment config file")->required();
    compare->add_option("--seeds", compare_args.seeds, "number of master seeds (0..k-1)");
    compare->add_option("--out", compare_args.out_dir, "output directory")->required();

    bool inject_fault = false;
    auto* gradcheck = app.add_subcommand("gradcheck", "verify every backward rule");
    gradcheck->add_flag("--inject-fault", inject_fault,
                        "corrupt one backward rule (negative control; expect exit 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) {
            if (seed_opt->count() > 0) train_args.seed = seed_flag;
            return scomm::cmd_train(train_args);
        }
        if (eval->parsed()) {
            if (!dump_dir.empty()) eval_args.dump_images = dump_dir;
            return scomm::cmd_eval(eval_args);
        }
        if (compare->parsed()) return scomm::cmd_compare(compare_args);
        if (gradcheck->parsed()) return scomm::cmd_gradcheck(inject_fault);
    } catch (const scomm::NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return 3;
    } catch (const scomm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const scomm::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const scomm::ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
