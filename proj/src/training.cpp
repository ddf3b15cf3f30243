#include "scomm/training.hpp"

#include <cmath>

#include "scomm/errors.hpp"
#include "scomm/ops.hpp"

namespace scomm {

std::string regimen_name(Regimen r) {
    switch (r) {
        case Regimen::alone: return "alone";
        case Regimen::iterative: return "iterative";
        case Regimen::proposed: return "proposed";
        case Regimen::proposed_transfer: return "proposed+transfer";
        case Regimen::proposed_transfer_frozen: return "proposed+transfer-frozen";
        case Regimen::proposed_kd: return "proposed+kd";
    }
    return "?";
}

std::optional<Regimen> parse_regimen(const std::string& name) {
    for (Regimen r : all_regimens())
        if (regimen_name(r) == name) return r;
    return std::nullopt;
}

std::vector<Regimen> all_regimens() {
    return {Regimen::alone,
            Regimen::iterative,
            Regimen::proposed,
            Regimen::proposed_transfer,
            Regimen::proposed_transfer_frozen,
            Regimen::proposed_kd};
}

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (alpha < 0) throw ConfigError("train: alpha must be >= 0");
    if (learning_rate <= 0) throw ConfigError("train: learning_rate must be > 0");
}

void TrainContext::init_streams() {
    if (streams_ready) return;
    train.validate();
    model.validate();
    channel.validate();
    shuffle_stream = rng::Stream::derive(train.master_seed, "shuffle");
    const uint64_t noise_seed =
        channel.noise_seed ? *channel.noise_seed : rng::derive_seed(train.master_seed, "noise");
    noise_stream = rng::Stream(noise_seed);
    eval_seed = rng::derive_seed(train.master_seed, "eval");
    streams_ready = true;
}

Tensor loss_reconstruction(Tape* tape, const Tensor& image, const Tensor& recon) {
    return mse(tape, image, recon);
}

Tensor loss_distill(Tape* tape, const Tensor& teacher_recon, const Tensor& student_recon) {
    if (teacher_recon->requires_grad)
        throw ConfigError("loss_distill: teacher output still carries gradients; "
                          "freeze the teacher first");
    return mse(tape, teacher_recon, student_recon);
}

Tensor loss_combined(Tape* tape, const Tensor& image, const Tensor& student_recon,
                     const Tensor& teacher_recon, double alpha) {
    if (alpha < 0) throw ConfigError("loss_combined: alpha must be >= 0");
    Tensor rec = loss_reconstruction(tape, image, student_recon);
    Tensor distill = loss_distill(tape, teacher_recon, student_recon);
    return add(tape, rec, scale(tape, distill, alpha));
}

namespace {

double train_one_epoch(TrainContext& ctx, ParameterSet& params, DecoderId decoder, bool kd,
                       Adam& adam, size_t epoch) {
    const auto epoch_batches = batches(ctx.train_set, ctx.train.batch_size, ctx.shuffle_stream);
    double loss_sum = 0.0;
    for (size_t bi = 0; bi < epoch_batches.size(); ++bi) {
        try {
            Adam::zero_grad(params);
            const double snr = sample_snr(ctx.channel, ctx.noise_stream);
            Tape tape;
            Tensor batch_loss;
            for (size_t idx : epoch_batches[bi]) {
                const Tensor& img = ctx.train_set.images[idx];
                const size_t h = img->shape[0], w = img->shape[1];
                Tensor x = encode(&tape, img, params, ctx.model);
                x = normalize_power(&tape, x);
                Tensor y = transmit(&tape, x, snr, ctx.noise_stream);
                Tensor student = decode(&tape, y, params, ctx.model, decoder, h, w);
                Tensor li;
                if (kd) {
                    // Teacher reads the same received signal; its parameters
                    // are frozen, so this adds nothing to the tape.
                    Tensor teacher =
                        decode(&tape, y, params, ctx.model, DecoderId::hcd, h, w);
                    li = loss_combined(&tape, img, student, teacher, ctx.train.alpha);
                } else {
                    li = loss_reconstruction(&tape, img, student);
                }
                batch_loss = batch_loss ? add(&tape, batch_loss, li) : li;
            }
            batch_loss =
                scale(&tape, batch_loss, 1.0 / static_cast<double>(epoch_batches[bi].size()));
            if (!std::isfinite(batch_loss->values[0]))
                throw NumericError("non-finite batch loss");
            tape.backward(batch_loss);
            adam.step(params);
            loss_sum += batch_loss->values[0];
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(epoch) + " batch " +
                               std::to_string(bi) + ": " + e.what());
        }
    }
    return loss_sum / static_cast<double>(epoch_batches.size());
}

void append_epoch_rows(TrainContext& ctx, const ParameterSet& params, DecoderId decoder,
                       int phase, size_t epoch, double train_loss,
                       std::vector<MetricsRecord>& log) {
    MetricsRecord train_row;
    train_row.regimen = regimen_name(ctx.train.regimen);
    train_row.seed = ctx.train.master_seed;
    train_row.phase = phase;
    train_row.epoch = epoch;
    train_row.snr_db = 0.0;  // train rows mix SNRs; serialized as "mix"
    train_row.split = "train";
    train_row.mse = train_loss;
    train_row.psnr_db = psnr_from_mse(train_loss);
    log.push_back(train_row);
    if (ctx.on_epoch) ctx.on_epoch(train_row);
    auto recs = evaluate(params, ctx.model, decoder, ctx.test_set, ctx.channel.snr_set_db,
                         ctx.eval_seed);
    for (MetricsRecord& r : recs) {
        r.regimen = regimen_name(ctx.train.regimen);
        r.seed = ctx.train.master_seed;
        r.phase = phase;
        r.epoch = epoch;
        log.push_back(r);
    }
}

Adam make_adam(const TrainConfig& cfg) {
    AdamConfig a;
    a.lr = cfg.learning_rate;
    return Adam(a);
}

}  // namespace

void run_phase1(TrainContext& ctx, ParameterSet& params, std::vector<MetricsRecord>& log) {
    ctx.init_streams();
    set_trainable(params, {"enc.", "dec1."}, true);
    set_trainable(params, {"dec2."}, false);
    Adam adam = make_adam(ctx.train);
    for (size_t e = 1; e <= ctx.train.epochs; ++e) {
        ++ctx.epochs_done;
        const double loss =
            train_one_epoch(ctx, params, DecoderId::hcd, false, adam, ctx.epochs_done);
        append_epoch_rows(ctx, params, DecoderId::hcd, 1, ctx.epochs_done, loss, log);
    }
}

void run_phase2(TrainContext& ctx, ParameterSet& params, std::vector<MetricsRecord>& log,
                bool kd, TransferMode transfer) {
    ctx.init_streams();
    set_trainable(params, {"enc.", "dec1."}, false);
    set_trainable(params, {"dec2."}, true);
    if (transfer != TransferMode::none) transfer_stages(params, ctx.model);
    if (transfer == TransferMode::copy_freeze)
        set_trainable(params, transfer_prefixes(ctx.model, DecoderId::lcd), false);
    Adam adam = make_adam(ctx.train);
    for (size_t e = 1; e <= ctx.train.epochs; ++e) {
        ++ctx.epochs_done;
        const double loss =
            train_one_epoch(ctx, params, DecoderId::lcd, kd, adam, ctx.epochs_done);
        append_epoch_rows(ctx, params, DecoderId::lcd, 2, ctx.epochs_done, loss, log);
    }
}

void run_iterative(TrainContext& ctx, ParameterSet& params, std::vector<MetricsRecord>& log) {
    ctx.init_streams();
    set_trainable(params, {"enc."}, true);
    Adam adam = make_adam(ctx.train);
    for (size_t e = 1; e <= 2 * ctx.train.epochs; ++e) {
        const bool hcd_epoch = e % 2 == 1;
        set_trainable(params, {"dec1."}, hcd_epoch);
        set_trainable(params, {"dec2."}, !hcd_epoch);
        const DecoderId dec = hcd_epoch ? DecoderId::hcd : DecoderId::lcd;
        ++ctx.epochs_done;
        const double loss = train_one_epoch(ctx, params, dec, false, adam, ctx.epochs_done);
        append_epoch_rows(ctx, params, dec, hcd_epoch ? 1 : 2, ctx.epochs_done, loss, log);
    }
}

void run_train_alone(TrainContext& ctx, ParameterSet& params, std::vector<MetricsRecord>& log) {
    ctx.init_streams();
    set_trainable(params, {"enc.", "dec2."}, true);
    set_trainable(params, {"dec1."}, false);
    Adam adam = make_adam(ctx.train);
    for (size_t e = 1; e <= ctx.train.epochs; ++e) {
        ++ctx.epochs_done;
        const double loss =
            train_one_epoch(ctx, params, DecoderId::lcd, false, adam, ctx.epochs_done);
        append_epoch_rows(ctx, params, DecoderId::lcd, 2, ctx.epochs_done, loss, log);
    }
}

RegimenResult run_regimen(TrainContext& ctx,
                          const std::function<void(int, const ParameterSet&)>& on_phase) {
    ctx.init_streams();
    RegimenResult result;
    result.params = build(ctx.model, rng::derive_seed(ctx.train.master_seed, "init"));
    const size_t t = ctx.train.epochs;
    switch (ctx.train.regimen) {
        case Regimen::alone:
            run_train_alone(ctx, result.params, result.log);
            result.total_epochs = t;
            result.lcd_epochs = t;
            break;
        case Regimen::iterative:
            run_iterative(ctx, result.params, result.log);
            result.total_epochs = 2 * t;
            result.lcd_epochs = t;
            break;
        case Regimen::proposed:
        case Regimen::proposed_transfer:
        case Regimen::proposed_transfer_frozen:
        case Regimen::proposed_kd: {
            run_phase1(ctx, result.params, result.log);
            if (on_phase) on_phase(1, result.params);
            TransferMode transfer = TransferMode::none;
            if (ctx.train.regimen == Regimen::proposed_transfer) transfer = TransferMode::copy;
            if (ctx.train.regimen == Regimen::proposed_transfer_frozen)
                transfer = TransferMode::copy_freeze;
            const bool kd = ctx.train.regimen == Regimen::proposed_kd;
            run_phase2(ctx, result.params, result.log, kd, transfer);
            result.total_epochs = 2 * t;
            result.lcd_epochs = t;
            break;
        }
    }
    if (on_phase) on_phase(0, result.params);
    return result;
}

}  // namespace scomm
