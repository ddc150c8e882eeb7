#include "otfm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "otfm/otcouple.hpp"

namespace otfm {

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (coupling == Coupling::Ot && batch_size < 2)
        throw std::invalid_argument("TrainConfig: OT coupling needs batch_size >= 2");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (!(warmup_frac > 0.0 && warmup_frac < 1.0))
        throw std::invalid_argument("TrainConfig: warmup_frac must lie in (0, 1)");
    if (!(min_lr <= base_lr)) throw std::invalid_argument("TrainConfig: min_lr must not exceed base_lr");
    if (!(warmup_floor_lr <= base_lr))
        throw std::invalid_argument("TrainConfig: warmup_floor_lr must not exceed base_lr");
    path.validate();
}

double lr_at(const TrainConfig& config, long step, long total_steps) {
    if (step < 0 || step >= total_steps) throw std::invalid_argument("lr_at: step outside [0, total_steps)");
    const long warmup = std::lround(config.warmup_frac * static_cast<double>(total_steps));
    if (step < warmup)
        return config.warmup_floor_lr +
               (config.base_lr - config.warmup_floor_lr) * static_cast<double>(step) / static_cast<double>(warmup);
    const long denom = std::max<long>(1, total_steps - 1 - warmup);
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(denom);
    return config.min_lr + 0.5 * (config.base_lr - config.min_lr) * (1.0 + std::cos(3.14159265358979323846 * progress));
}

void adam_update(std::vector<double>& params, AdamState& state, const std::vector<double>& grads,
                 double lr, const AdamConfig& config) {
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (grads.size() != params.size()) throw std::invalid_argument("adam_update: gradient shape mismatch");
    state.step += 1;
    const double b1 = config.beta1, b2 = config.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
        const double mh = state.m[i] / c1;
        const double vh = state.v[i] / c2;
        params[i] -= lr * mh / (std::sqrt(vh) + config.eps);
    }
}

long steps_per_epoch(std::size_t dataset_size, int batch_size) {
    return static_cast<long>((dataset_size + static_cast<std::size_t>(batch_size) - 1) /
                             static_cast<std::size_t>(batch_size));
}

TrainerState init_trainer(const FnoConfig& fno, const TrainConfig& config) {
    config.validate();
    TrainerState state;
    state.params = init_params(fno, Rng(config.seed).stream("init").next_u64());
    state.adam.m.assign(state.params.flat.size(), 0.0);
    state.adam.v.assign(state.params.flat.size(), 0.0);
    return state;
}

TrainRecord train_step(TrainerState& state, const std::vector<const Field*>& data_batch,
                       const std::vector<Field>& noise_batch, const std::vector<double>& t_draw,
                       const TrainConfig& config, double lr) {
    const auto t_start = std::chrono::steady_clock::now();
    const std::size_t b = data_batch.size();
    if (b == 0 || noise_batch.size() != b)
        throw std::invalid_argument("train_step: data and noise batches must be equally sized");
    if (t_draw.size() != 1 && t_draw.size() != b)
        throw std::invalid_argument("train_step: t_draw must hold 1 or batch_size entries");

    std::vector<const Field*> data(data_batch);
    TrainRecord rec;
    rec.step = state.step;

    // Mini-batch coupling: pairwise costs, exact assignment, data reorder.
    std::vector<Field> data_copy;
    data_copy.reserve(b);
    for (const Field* f : data) data_copy.push_back(*f);
    const CostMatrix m = cost_matrix(noise_batch, data_copy);
    rec.id_cost = identity_cost(m);
    if (config.coupling == TrainConfig::Coupling::Ot && b > 1) {
        const Coupling coupling = solve_assignment(m);
        rec.ot_cost = coupling.total_cost;
        std::vector<const Field*> reordered(b);
        for (std::size_t i = 0; i < b; ++i) reordered[i] = data[static_cast<std::size_t>(coupling.sigma[i])];
        data = std::move(reordered);
    } else {
        rec.ot_cost = rec.id_cost;
    }

    // Displacement (or Gaussian) path states and targets.
    std::vector<Field> f_t(b), v_target(b);
    std::vector<TrainingSample> samples(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double t = t_draw.size() == 1 ? t_draw[0] : t_draw[i];
        PathSample ps = interpolate(config.path, noise_batch[i], *data[i], t);
        f_t[i] = std::move(ps.f_t);
        v_target[i] = std::move(ps.v_target);
        samples[i] = TrainingSample{t, &f_t[i], &v_target[i]};
    }

    std::vector<double> grads;
    double loss;
    try {
        loss = config.f32 ? fno_loss_and_grad_f32(state.params, samples, grads, config.workers, config.eval)
                          : fno_loss_and_grad(state.params, samples, grads, config.workers, config.eval);
    } catch (const std::runtime_error& e) {
        std::ostringstream os;
        os << "train_step " << state.step << ": " << e.what();
        throw std::runtime_error(os.str());
    }
    if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "train_step " << state.step << ": non-finite loss";
        throw std::runtime_error(os.str());
    }

    if (config.clip_norm > 0.0) {
        double sq = 0.0;
        for (double g : grads) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > config.clip_norm) {
            const double s = config.clip_norm / norm;
            for (double& g : grads) g *= s;
        }
    }

    adam_update(state.params.flat, state.adam, grads, lr, config.adam);
    state.step += 1;

    rec.lr = lr;
    rec.loss = loss;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rec;
}

void train(TrainerState& state, const std::vector<Field>& dataset, const TrainConfig& config,
           const KernelSpec& kernel, const TrainHooks& hooks) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
    const GridSpec grid = dataset.front().grid;
    grid.validate();
    for (const auto& f : dataset) {
        require_same_grid(f.grid, grid, "train");
        if (f.values.size() != static_cast<std::size_t>(grid.num_nodes()))
            throw std::invalid_argument("train: malformed dataset field");
    }
    state.params.config.validate();
    if (state.params.config.modes > grid.nx / 2 || state.params.config.modes > grid.ny / 2)
        throw std::invalid_argument("train: fno modes exceed the dataset grid Nyquist");

    const long spe = steps_per_epoch(dataset.size(), config.batch_size);
    const long total_steps = spe * config.epochs;
    const Rng master(config.seed);
    GrfSampler noise(kernel, grid, master.stream("noise-master").next_u64());

    while (state.step < total_steps) {
        const long step = state.step;
        const int epoch = static_cast<int>(step / spe);
        const long pos = step % spe;

        // Per-epoch data order, reseeded from (seed, epoch).
        std::vector<std::size_t> order(dataset.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle = master.stream("shuffle", static_cast<std::uint64_t>(epoch));
        for (std::size_t i = dataset.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle.next_below(i)]);

        const std::size_t begin = static_cast<std::size_t>(pos) * static_cast<std::size_t>(config.batch_size);
        const std::size_t end = std::min(dataset.size(), begin + static_cast<std::size_t>(config.batch_size));
        std::vector<const Field*> data_batch;
        for (std::size_t i = begin; i < end; ++i) data_batch.push_back(&dataset[order[i]]);
        const std::size_t b = data_batch.size();

        // Fresh noise draws; sample indices are unique per (step, slot).
        std::vector<Field> noise_batch;
        noise_batch.reserve(b);
        for (std::size_t i = 0; i < b; ++i)
            noise_batch.push_back(
                noise.sample_at(static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(config.batch_size) + i));

        Rng trng = master.stream("time", static_cast<std::uint64_t>(step));
        std::vector<double> t_draw(config.per_sample_t ? b : 1);
        for (auto& t : t_draw) t = trng.uniform();

        const double lr = lr_at(config, step, total_steps);
        TrainRecord rec = train_step(state, data_batch, noise_batch, t_draw, config, lr);
        rec.epoch = epoch;
        if (hooks.on_record) hooks.on_record(rec);

        const bool epoch_done = (pos + 1 == spe);
        if (epoch_done && hooks.on_checkpoint) {
            const bool last = (state.step == total_steps);
            if (last || (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0))
                hooks.on_checkpoint(state, epoch);
        }
    }
}

} // namespace otfm
