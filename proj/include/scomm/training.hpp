#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scomm/channel.hpp"
#include "scomm/data.hpp"
#include "scomm/metrics.hpp"
#include "scomm/model.hpp"

namespace scomm {

enum class Regimen {
    alone,
    iterative,
    proposed,
    proposed_transfer,
    proposed_transfer_frozen,
    proposed_kd,
};

std::string regimen_name(Regimen r);
std::optional<Regimen> parse_regimen(const std::string& name);
std::vector<Regimen> all_regimens();

struct TrainConfig {
    size_t epochs = 30;  // T, per decoder
    double learning_rate = 5e-4;
    size_t batch_size = 8;
    double alpha = 0.5;  // distillation weight
    Regimen regimen = Regimen::proposed;
    uint64_t master_seed = 0;

    void validate() const;
};

// Everything one training run needs. The three RNG streams (init, shuffle,
// noise) plus the evaluation stream all derive from master_seed by fixed
// labels; an explicit channel noise_seed overrides only the noise stream.
// Stream state lives here so consecutive phases continue where the previous
// phase stopped.
struct TrainContext {
    ModelConfig model;
    ChannelConfig channel;
    TrainConfig train;
    Dataset train_set;
    Dataset test_set;

    rng::Stream shuffle_stream;
    rng::Stream noise_stream;
    uint64_t eval_seed = 0;
    size_t epochs_done = 0;
    bool streams_ready = false;

    // Optional progress hook, fired once per epoch with the train-loss row.
    std::function<void(const MetricsRecord&)> on_epoch;

    void init_streams();
};

struct RegimenResult {
    ParameterSet params;
    std::vector<MetricsRecord> log;
    size_t total_epochs = 0;
    size_t lcd_epochs = 0;
};

// Loss terms. loss_distill rejects a teacher output that still carries
// gradients; loss_combined is reconstruction + alpha * distillation with
// that exact association.
Tensor loss_reconstruction(Tape* tape, const Tensor& image, const Tensor& recon);
Tensor loss_distill(Tape* tape, const Tensor& teacher_recon, const Tensor& student_recon);
Tensor loss_combined(Tape* tape, const Tensor& image, const Tensor& student_recon,
                     const Tensor& teacher_recon, double alpha);

enum class TransferMode { none, copy, copy_freeze };

// The two stages of the proposed procedure. Phase 1 trains encoder + HCD
// for T epochs; phase 2 freezes them and trains the LCD, optionally with
// parameter transfer and/or distillation. Both append per-epoch rows
// (train loss + per-SNR test metrics) to the log.
void run_phase1(TrainContext& ctx, ParameterSet& params, std::vector<MetricsRecord>& log);
void run_phase2(TrainContext& ctx, ParameterSet& params, std::vector<MetricsRecord>& log,
                bool kd, TransferMode transfer);

// Baselines: alternating-epoch joint training (2T epochs, T of them LCD
// epochs) and encoder+LCD alone.
void run_iterative(TrainContext& ctx, ParameterSet& params, std::vector<MetricsRecord>& log);
void run_train_alone(TrainContext& ctx, ParameterSet& params, std::vector<MetricsRecord>& log);

// Builds fresh parameters and dispatches on ctx.train.regimen. The callback
// (when set) fires after each completed phase with (phase id, params).
RegimenResult run_regimen(TrainContext& ctx,
                          const std::function<void(int, const ParameterSet&)>& on_phase = {});

}  // namespace scomm
