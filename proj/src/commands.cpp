#include "scomm/commands.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "scomm/config.hpp"
#include "scomm/errors.hpp"
#include "scomm/ops.hpp"
#include "scomm/training.hpp"

namespace scomm {

namespace {

namespace fs = std::filesystem;

std::string metrics_row(const MetricsRecord& r) {
    std::string snr = r.split == "train" ? "mix" : fmt_double(r.snr_db);
    return r.regimen + "," + std::to_string(r.seed) + "," + std::to_string(r.phase) + "," +
           std::to_string(r.epoch) + "," + snr + "," + r.split + "," + fmt_double(r.mse) + "," +
           fmt_double(r.psnr_db) + "\n";
}

TrainContext make_context(const ExperimentConfig& cfg, const Dataset& train_set,
                          const Dataset& test_set) {
    TrainContext ctx;
    ctx.model = cfg.model;
    ctx.channel = cfg.channel;
    ctx.train = cfg.train;
    ctx.train_set = train_set;
    ctx.test_set = test_set;
    return ctx;
}

std::vector<double> parse_snr_arg(const std::string& arg) {
    std::vector<double> out;
    std::string item;
    std::stringstream ss(arg);
    while (std::getline(ss, item, ',')) {
        if (item == "inf")
            out.push_back(std::numeric_limits<double>::infinity());
        else {
            try {
                size_t pos = 0;
                out.push_back(std::stod(item, &pos));
                if (pos != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ConfigError("bad SNR value '" + item + "'");
            }
        }
    }
    if (out.empty()) throw ConfigError("empty SNR list");
    return out;
}

}  // namespace

std::string metrics_csv(const std::vector<MetricsRecord>& rows) {
    std::string out = "regimen,seed,phase,epoch,snr_db,split,mse,psnr_db\n";
    for (const auto& r : rows) out += metrics_row(r);
    return out;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

int cmd_train(const TrainArgs& args) {
    ExperimentConfig cfg = load_config_file(args.config);
    if (!args.regimen.empty()) {
        auto r = parse_regimen(args.regimen);
        if (!r) throw ConfigError("unknown regimen '" + args.regimen + "'");
        cfg.train.regimen = *r;
    }
    if (args.seed) cfg.train.master_seed = *args.seed;
    cfg.model.validate();
    cfg.train.validate();
    cfg.channel.validate();

    TrainContext ctx = make_context(cfg, make_train_dataset(cfg.data), make_test_dataset(cfg.data));
    ctx.on_epoch = [](const MetricsRecord& r) {
        std::cerr << r.regimen << " seed " << r.seed << " phase " << r.phase << " epoch "
                  << r.epoch << " train_mse " << fmt_double(r.mse) << "\n";
    };
    fs::create_directories(args.out_dir);
    RegimenResult result = run_regimen(ctx, [&](int phase, const ParameterSet& p) {
        if (phase == 1) save_checkpoint(p, args.out_dir / "phase1.ckpt");
    });
    save_checkpoint(result.params, args.out_dir / "final.ckpt");
    write_text_file(args.out_dir / "train_log.csv", metrics_csv(result.log));
    std::cout << regimen_name(cfg.train.regimen) << " seed " << cfg.train.master_seed
              << ": total_epochs " << result.total_epochs << " lcd_epochs " << result.lcd_epochs
              << "\n";
    return 0;
}

int cmd_eval(const EvalArgs& args) {
    ExperimentConfig cfg = load_config_file(args.config);
    if (args.decoder != 1 && args.decoder != 2)
        throw ConfigError("decoder must be 1 (hcd) or 2 (lcd)");
    const DecoderId which = args.decoder == 1 ? DecoderId::hcd : DecoderId::lcd;
    ParameterSet params = load_checkpoint(args.checkpoint);
    validate_against(params, cfg.model);

    Dataset test;
    if (args.data.empty() || args.data == "synth") {
        test = make_test_dataset(cfg.data);
    } else {
        test = load_ppm_dir(args.data, cfg.data.extent, cfg.data.n_test);
        test.split = "test";
    }
    const std::vector<double> snrs =
        args.snr_list.empty() ? cfg.channel.snr_set_db : parse_snr_arg(args.snr_list);

    std::vector<MetricsRecord> rows =
        evaluate(params, cfg.model, which, test, snrs, args.eval_seed);
    for (MetricsRecord& r : rows) {
        r.regimen = "eval";
        r.seed = args.eval_seed;
        r.phase = args.decoder;
        r.epoch = 0;
    }
    write_text_file(args.out_csv, metrics_csv(rows));

    if (args.dump_images) {
        fs::create_directories(*args.dump_images);
        for (double snr : snrs) {
            for (size_t i = 0; i < test.size(); ++i) {
                const Tensor& img = test.images[i];
                Tensor x = normalize_power(nullptr, encode(nullptr, img, params, cfg.model));
                rng::Stream noise = rng::Stream::derive(args.eval_seed, "eval-noise", i,
                                                        std::bit_cast<uint64_t>(snr));
                Tensor y = transmit(nullptr, x, snr, noise);
                Tensor rec = decode(nullptr, y, params, cfg.model, which, img->shape[0],
                                    img->shape[1], /*clamp_output=*/true);
                write_ppm(*args.dump_images /
                              (std::to_string(i) + "_" + fmt_double(snr) + ".ppm"),
                          rec);
            }
        }
    }
    return 0;
}

int cmd_compare(const CompareArgs& args) {
    if (args.seeds == 0) throw ConfigError("compare: seeds must be >= 1");
    ExperimentConfig cfg = load_config_file(args.config);
    cfg.model.validate();
    cfg.train.validate();
    cfg.channel.validate();
    const Dataset train_set = make_train_dataset(cfg.data);
    const Dataset test_set = make_test_dataset(cfg.data);
    fs::create_directories(args.out_dir / "cells");

    // curve SNR: 3 dB when configured, else the first of the set
    double curve_snr = cfg.channel.snr_set_db.front();
    for (double s : cfg.channel.snr_set_db)
        if (s == 3.0) curve_snr = 3.0;

    struct CellKey {
        std::string regimen;
        uint64_t seed;
    };
    struct Aggregate {
        // final-epoch LCD psnr per seed, keyed by snr
        std::map<double, std::vector<double>> final_psnr;
        // per lcd-epoch ordinal, per seed, psnr at curve_snr
        std::vector<std::vector<double>> curve;
        size_t total_epochs = 0;
        size_t lcd_epochs = 0;
    };
    std::map<std::string, Aggregate> agg;

    for (Regimen regimen : all_regimens()) {
        for (uint64_t seed = 0; seed < args.seeds; ++seed) {
            TrainContext ctx = make_context(cfg, train_set, test_set);
            ctx.train.regimen = regimen;
            ctx.train.master_seed = seed;
            ctx.on_epoch = [](const MetricsRecord& r) {
                std::cerr << r.regimen << " seed " << r.seed << " epoch " << r.epoch
                          << " train_mse " << fmt_double(r.mse) << "\n";
            };
            RegimenResult result = run_regimen(ctx);
            const std::string name = regimen_name(regimen);
            write_text_file(args.out_dir / "cells" /
                                (name + "_seed" + std::to_string(seed) + ".csv"),
                            metrics_csv(result.log));

            Aggregate& a = agg[name];
            a.total_epochs = result.total_epochs;
            a.lcd_epochs = result.lcd_epochs;
            // LCD rows are the phase-2 test rows, in epoch order.
            std::vector<size_t> lcd_rows;
            size_t last_epoch = 0;
            for (size_t i = 0; i < result.log.size(); ++i) {
                const MetricsRecord& r = result.log[i];
                if (r.phase == 2 && r.split == "test") {
                    lcd_rows.push_back(i);
                    last_epoch = std::max(last_epoch, r.epoch);
                }
            }
            size_t ordinal = 0;
            size_t prev_epoch = 0;
            for (size_t i : lcd_rows) {
                const MetricsRecord& r = result.log[i];
                if (r.epoch != prev_epoch) {
                    ++ordinal;
                    prev_epoch = r.epoch;
                }
                if (r.epoch == last_epoch) a.final_psnr[r.snr_db].push_back(r.psnr_db);
                if (r.snr_db == curve_snr) {
                    if (a.curve.size() < ordinal) a.curve.resize(ordinal);
                    a.curve[ordinal - 1].push_back(r.psnr_db);
                }
            }
        }
    }

    std::string csv = "regimen,snr_db,seeds,lcd_epochs,total_epochs,mean_psnr_db,stddev_psnr_db\n";
    for (Regimen regimen : all_regimens()) {
        const std::string name = regimen_name(regimen);
        const Aggregate& a = agg.at(name);
        for (double snr : cfg.channel.snr_set_db) {
            const auto& vals = a.final_psnr.at(snr);
            double mean = 0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double var = 0;
            for (double v : vals) var += (v - mean) * (v - mean);
            var /= static_cast<double>(vals.size());
            csv += name + "," + fmt_double(snr) + "," + std::to_string(vals.size()) + "," +
                   std::to_string(a.lcd_epochs) + "," + std::to_string(a.total_epochs) + "," +
                   fmt_double(mean) + "," + fmt_double(std::sqrt(var)) + "\n";
        }
        // convergence curve at curve_snr: lcd_epoch vs mean psnr
        std::string curve;
        for (size_t e = 0; e < a.curve.size(); ++e) {
            double mean = 0;
            for (double v : a.curve[e]) mean += v;
            mean /= static_cast<double>(a.curve[e].size());
            curve += std::to_string(e + 1) + " " + fmt_double(mean) + "\n";
        }
        write_text_file(args.out_dir / ("curve_snr" + fmt_double(curve_snr) + "_" + name + ".dat"),
                        curve);
        // final psnr vs snr
        std::string sweep;
        for (double snr : cfg.channel.snr_set_db) {
            const auto& vals = a.final_psnr.at(snr);
            double mean = 0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            sweep += fmt_double(snr) + " " + fmt_double(mean) + "\n";
        }
        write_text_file(args.out_dir / ("psnr_vs_snr_" + name + ".dat"), sweep);
    }
    write_text_file(args.out_dir / "compare.csv", csv);
    return 0;
}

namespace {

struct CheckResult {
    std::string name;
    double err;
};

Tensor random_tensor(std::vector<size_t> shape, rng::Stream& s, bool param) {
    Tensor t = param ? make_param(shape) : make_tensor(shape);
    for (double& v : t->values) v = s.next_gaussian();
    return t;
}

// Reduce an op output to a scalar with data-dependent weights so every
// output coordinate contributes a distinct gradient.
Tensor to_scalar(Tape* tape, const Tensor& out, const Tensor& target) {
    return mse(tape, out, target);
}

std::vector<CheckResult> run_op_checks() {
    std::vector<CheckResult> results;
    auto check = [&](const std::string& name, const std::function<Tensor(Tape*)>& f,
                     const std::vector<Tensor>& params) {
        const double err = grad_check(f, params, 1e-5);
        for (auto& r : results)
            if (r.name == name) {
                r.err = std::max(r.err, err);
                return;
            }
        results.push_back({name, err});
    };

    for (uint64_t seed = 0; seed < 10; ++seed) {
        rng::Stream s(seed * 7919 + 13);
        const size_t m = 2 + s.next_below(4), k = 2 + s.next_below(4), n = 2 + s.next_below(4);

        {
            Tensor a = random_tensor({m, k}, s, true);
            Tensor b = random_tensor({k, n}, s, true);
            Tensor tgt = random_tensor({m, n}, s, false);
            check("matmul", [&](Tape* t) { return to_scalar(t, matmul(t, a, b), tgt); }, {a, b});
        }
        {
            const size_t batch = 1 + s.next_below(3);
            Tensor a = random_tensor({batch, m, k}, s, true);
            Tensor b = random_tensor({batch, k, n}, s, true);
            Tensor bt = random_tensor({batch, n, k}, s, true);
            Tensor tgt = random_tensor({batch, m, n}, s, false);
            check("bmm", [&](Tape* t) { return to_scalar(t, bmm(t, a, b, false), tgt); }, {a, b});
            check("bmm_nt", [&](Tape* t) { return to_scalar(t, bmm(t, a, bt, true), tgt); },
                  {a, bt});
        }
        {
            Tensor x = random_tensor({m, n}, s, true);
            Tensor b = random_tensor({n}, s, true);
            Tensor tgt = random_tensor({m, n}, s, false);
            check("bias_add", [&](Tape* t) { return to_scalar(t, bias_add(t, x, b), tgt); },
                  {x, b});
            Tensor gamma = random_tensor({n}, s, true);
            Tensor beta = random_tensor({n}, s, true);
            check("layer_norm",
                  [&](Tape* t) { return to_scalar(t, layer_norm(t, x, gamma, beta), tgt); },
                  {x, gamma, beta});
            check("softmax", [&](Tape* t) { return to_scalar(t, softmax(t, x), tgt); }, {x});
            check("gelu", [&](Tape* t) { return to_scalar(t, gelu(t, x), tgt); }, {x});
            check("scale", [&](Tape* t) { return to_scalar(t, scale(t, x, 1.7), tgt); }, {x});
            Tensor x2 = random_tensor({m, n}, s, true);
            check("add", [&](Tape* t) { return to_scalar(t, add(t, x, x2), tgt); }, {x, x2});
            check("mse", [&](Tape* t) { return mse(t, x, x2); }, {x, x2});
            check("sum", [&](Tape* t) { return scale(t, sum(t, x), 0.3); }, {x});
        }
        {
            const size_t cnt = m * n;
            Tensor x = random_tensor({m, n}, s, true);
            auto idx = std::make_shared<std::vector<size_t>>(s.permutation(cnt));
            Tensor tgt = random_tensor({cnt}, s, false);
            check("gather", [&](Tape* t) { return to_scalar(t, gather(t, x, idx, {cnt}), tgt); },
                  {x});
        }
        {
            const size_t heads = 1 + s.next_below(2);
            const size_t d = heads * (2 + s.next_below(3));
            const size_t tok = 2 + s.next_below(4);
            Tensor q = random_tensor({tok, d}, s, true);
            Tensor k2 = random_tensor({tok, d}, s, true);
            Tensor v = random_tensor({tok, d}, s, true);
            Tensor tgt = random_tensor({tok, d}, s, false);
            check("attention",
                  [&](Tape* t) { return to_scalar(t, attention(t, q, k2, v, heads), tgt); },
                  {q, k2, v});
        }
        {
            const size_t win = 2;
            const size_t h = win * (1 + s.next_below(2)), w = win * (1 + s.next_below(2));
            const size_t d = 1 + s.next_below(3);
            Tensor x = random_tensor({h, w, d}, s, true);
            Tensor tgt = random_tensor({h, w, d}, s, false);
            check("window_partition+merge",
                  [&](Tape* t) {
                      Tensor wp = window_partition(t, x, win);
                      return to_scalar(t, window_merge(t, wp, h, w, win), tgt);
                  },
                  {x});
        }
        {
            const size_t n1 = 3 + s.next_below(4);
            Tensor x = random_tensor({n1}, s, true);
            Tensor tgt = random_tensor({n1}, s, false);
            check("normalize_power",
                  [&](Tape* t) { return to_scalar(t, normalize_power(t, x), tgt); }, {x});
            std::vector<double> noise(n1);
            for (double& v : noise) v = s.next_gaussian();
            check("add_constant",
                  [&](Tape* t) { return to_scalar(t, add_constant(t, x, noise), tgt); }, {x});
        }
    }
    return results;
}

ModelConfig gradcheck_model_config() {
    ModelConfig cfg;
    cfg.patch_size = 1;
    cfg.stage_dims = {4, 8};
    cfg.encoder_depths = {1, 1};
    cfg.hcd_depths = {1, 1};
    cfg.lcd_depths = {1, 1};
    cfg.heads = {1, 2};
    cfg.window_size = 2;
    cfg.shifted_windows = true;
    cfg.compression_ratio = {1, 4};
    cfg.mlp_ratio = 2;
    return cfg;
}

// Fresh-build weights are sigma=0.02, which leaves the pre-normalization
// latent tiny and normalize_power extremely curved; central differences
// would then measure truncation error, not the backward rule. Scaling the
// dense weights up moves the check to a well-conditioned point.
ParameterSet gradcheck_params(const ModelConfig& cfg) {
    ParameterSet params = build(cfg, 99);
    for (auto& [name, p] : params) {
        if (!name.ends_with(".w") || name.find(".ln") != std::string::npos) continue;
        for (double& v : p->values) v *= 15.0;
    }
    return params;
}

std::vector<CheckResult> run_pipeline_checks() {
    std::vector<CheckResult> results;
    const ModelConfig cfg = gradcheck_model_config();
    const size_t hw = 4;
    rng::Stream s(424242);
    Tensor img = make_tensor({hw, hw, 3});
    for (double& v : img->values) v = s.next_unit();
    std::vector<double> noise(cfg.symbol_count(hw, hw));
    for (double& v : noise) v = 0.3 * s.next_gaussian();

    // Phase-1 shape: everything from encoder to HCD loss is trainable.
    {
        ParameterSet params = gradcheck_params(cfg);
        set_trainable(params, {"dec2."}, false);
        auto f = [&](Tape* tape) {
            Tensor x = normalize_power(tape, encode(tape, img, params, cfg));
            Tensor y = add_constant(tape, x, noise);
            Tensor rec = decode(tape, y, params, cfg, DecoderId::hcd, hw, hw);
            return loss_reconstruction(tape, img, rec);
        };
        std::vector<Tensor> checked;
        for (auto& [name, p] : params)
            if (p->trainable) checked.push_back(p);
        results.push_back({"pipeline-phase1(enc+dec1)", grad_check(f, checked, 1e-5)});
    }
    // Phase-2 KD shape: encoder and teacher frozen, combined loss on the LCD.
    {
        ParameterSet params = gradcheck_params(cfg);
        set_trainable(params, {"enc.", "dec1."}, false);
        auto f = [&](Tape* tape) {
            Tensor x = normalize_power(tape, encode(tape, img, params, cfg));
            Tensor y = add_constant(tape, x, noise);
            Tensor student = decode(tape, y, params, cfg, DecoderId::lcd, hw, hw);
            Tensor teacher = decode(tape, y, params, cfg, DecoderId::hcd, hw, hw);
            return loss_combined(tape, img, student, teacher, 0.5);
        };
        std::vector<Tensor> checked;
        for (auto& [name, p] : params)
            if (p->trainable) checked.push_back(p);
        results.push_back({"pipeline-phase2(kd,dec2)", grad_check(f, checked, 1e-5)});
    }
    return results;
}

}  // namespace

int cmd_gradcheck(bool inject_fault) {
    testing::corrupt_gelu_backward = inject_fault;
    constexpr double kTol = 1e-4;
    std::vector<CheckResult> results = run_op_checks();
    for (const CheckResult& r : run_pipeline_checks()) results.push_back(r);
    testing::corrupt_gelu_backward = false;

    bool ok = true;
    double worst = 0;
    std::string worst_name;
    for (const CheckResult& r : results) {
        const bool pass = r.err <= kTol;
        ok = ok && pass;
        if (r.err >= worst) {
            worst = r.err;
            worst_name = r.name;
        }
        std::cout << (pass ? "PASS" : "FAIL") << " " << r.name
                  << " max_rel_err=" << fmt_double(r.err) << "\n";
    }
    std::cout << (ok ? "gradcheck OK" : "gradcheck FAILED") << " (worst: " << worst_name << " at "
              << fmt_double(worst) << ")\n";
    return ok ? 0 : 1;
}

}  // namespace scomm
