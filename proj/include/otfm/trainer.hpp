#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "otfm/grf.hpp"
#include "otfm/grid.hpp"
#include "otfm/neuralop.hpp"
#include "otfm/probpaths.hpp"

namespace otfm {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    int batch_size = 128;
    int epochs = 500;
    double base_lr = 1e-4;
    double warmup_frac = 0.10;
    double min_lr = 1e-6;
    double warmup_floor_lr = 1e-10;
    enum class Coupling { Ot, Independent };
    Coupling coupling = Coupling::Ot;
    PathKind path = PathKind::ot_displacement();
    bool per_sample_t = false; // default: one t per batch, per the training loop
    std::uint64_t seed = 0;
    AdamConfig adam;
    int checkpoint_every = 0; // epochs between checkpoints; 0 = final only
    int workers = 1;
    bool f32 = false;         // internal precision of the gradient pass
    double clip_norm = 0.0;   // global-norm clip; 0 disables
    EvalOptions eval;         // test hooks (linear activations)

    void validate() const;
};

// One row per optimizer step.
struct TrainRecord {
    long step = 0;
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double ot_cost = 0.0; // cost of the pairing actually used
    double id_cost = 0.0; // cost of the positional pairing
    double seconds = 0.0;
};

struct AdamState {
    long step = 0;
    std::vector<double> m, v;
};

// Everything needed to resume training bitwise: parameters, moments, and
// the step counter (all randomness is derived from (seed, step), so no
// generator state needs to be carried).
struct TrainerState {
    OperatorParams params;
    AdamState adam;
    long step = 0;
};

// Linear warmup from warmup_floor_lr to base_lr over the first
// warmup_frac of steps, then cosine annealing down to min_lr at the final
// step.
double lr_at(const TrainConfig& config, long step, long total_steps);

void adam_update(std::vector<double>& params, AdamState& state, const std::vector<double>& grads,
                 double lr, const AdamConfig& config);

long steps_per_epoch(std::size_t dataset_size, int batch_size);

TrainerState init_trainer(const FnoConfig& fno, const TrainConfig& config);

// One optimizer step on explicit batches (noise paired against data).
// t_draw must hold one entry (per-batch t) or batch_size entries.
TrainRecord train_step(TrainerState& state, const std::vector<const Field*>& data_batch,
                       const std::vector<Field>& noise_batch, const std::vector<double>& t_draw,
                       const TrainConfig& config, double lr);

struct TrainHooks {
    std::function<void(const TrainRecord&)> on_record;
    std::function<void(const TrainerState&, int epoch)> on_checkpoint;
};

// Full training loop: per-epoch reshuffled data order, fresh noise each
// step, OT or positional coupling, Adam updates under the warmup+cosine
// schedule. Resumes from state.step when nonzero.
void train(TrainerState& state, const std::vector<Field>& dataset, const TrainConfig& config,
           const KernelSpec& kernel, const TrainHooks& hooks = {});

} // namespace otfm
