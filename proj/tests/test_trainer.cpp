#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "otfm/grf.hpp"
#include "otfm/trainer.hpp"

using namespace otfm;

namespace {

TrainConfig quick_config() {
    TrainConfig c;
    c.batch_size = 4;
    c.epochs = 2;
    c.base_lr = 1e-3;
    c.seed = 11;
    return c;
}

FnoConfig tiny_fno() {
    FnoConfig f;
    f.n_layers = 1;
    f.modes = 2;
    f.width = 4;
    f.lift_dim = 4;
    f.proj_dim = 4;
    return f;
}

} // namespace

TEST_CASE("learning-rate schedule endpoints and continuity") {
    TrainConfig c;
    c.base_lr = 1e-4;
    c.min_lr = 1e-6;
    c.warmup_floor_lr = 1e-10;
    c.warmup_frac = 0.10;
    const long total = 1000;
    const long warmup = 100;

    CHECK(lr_at(c, 0, total) == 1e-10);
    CHECK(lr_at(c, warmup, total) == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(std::abs(lr_at(c, total - 1, total) - 1e-6) < 1e-12);

    // Continuity bounds: linear increments during warmup, bounded slope in
    // the cosine phase.
    for (long s = 0; s + 1 < total; ++s) {
        const double step_change = std::abs(lr_at(c, s + 1, total) - lr_at(c, s, total));
        if (s + 1 < warmup)
            CHECK(step_change <= (c.base_lr - c.warmup_floor_lr) / warmup * (1.0 + 1e-12));
        else if (s >= warmup)
            CHECK(step_change <= 3.14159265358979 * (c.base_lr - c.min_lr) / (2.0 * (total - 1 - warmup)) * 1.0001);
    }

    CHECK_THROWS_AS(lr_at(c, total, total), std::invalid_argument);
}

TEST_CASE("adam single step matches hand arithmetic") {
    // beta = (0.9, 0.999), eps = 1e-8, lr = 0.1, p0 = 1, g = 0.5:
    //   m = 0.05, v = 2.5e-4, mhat = 0.5, vhat = 0.25
    //   p1 = 1 - 0.1 * 0.5 / (0.5 + 1e-8)
    std::vector<double> p{1.0};
    AdamState st;
    adam_update(p, st, {0.5}, 0.1, AdamConfig{});
    const double expect = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
    CHECK(p[0] == expect);
    CHECK(st.m[0] == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(st.v[0] == doctest::Approx(2.5e-4).epsilon(1e-15));
}

TEST_CASE("degenerate coupling: noise equals data with zero-init model") {
    GridSpec g{8, 8, 1.0, 1.0};
    KernelSpec kernel{0.5, 0.5, 1.0, 0.0};
    GrfSampler sampler(kernel, g, 3);
    auto batch = sampler.sample(4);

    TrainerState state = init_trainer(tiny_fno(), quick_config());
    std::vector<const Field*> data;
    for (const auto& f : batch) data.push_back(&f);
    auto rec = train_step(state, data, batch, {0.5}, quick_config(), 1e-4);
    CHECK(rec.ot_cost == 0.0);
    CHECK(rec.loss == 0.0);
}

TEST_CASE("ot pairing cost never exceeds the positional cost") {
    GridSpec g{8, 8, 1.0, 1.0};
    KernelSpec kernel{0.5, 0.5, 1.0, 0.0};
    std::vector<Field> dataset = GrfSampler(kernel, g, 5).sample(24);

    TrainConfig c = quick_config();
    c.epochs = 2;
    TrainerState state = init_trainer(tiny_fno(), c);
    int checked = 0;
    TrainHooks hooks;
    hooks.on_record = [&](const TrainRecord& r) {
        CHECK(r.ot_cost <= r.id_cost);
        ++checked;
    };
    train(state, dataset, c, kernel, hooks);
    CHECK(checked == 2 * 6);
    CHECK(state.step == 12);
}

TEST_CASE("zero epochs returns the initialized parameters unchanged") {
    GridSpec g{8, 8, 1.0, 1.0};
    KernelSpec kernel{0.5, 0.5, 1.0, 0.0};
    auto dataset = GrfSampler(kernel, g, 5).sample(8);
    TrainConfig c = quick_config();
    c.epochs = 0;
    TrainerState state = init_trainer(tiny_fno(), c);
    const auto before = state.params.flat;
    int records = 0;
    TrainHooks hooks;
    hooks.on_record = [&](const TrainRecord&) { ++records; };
    train(state, dataset, c, kernel, hooks);
    CHECK(records == 0);
    CHECK(state.params.flat == before);
}

TEST_CASE("fixed seed gives bitwise-identical traces") {
    GridSpec g{8, 8, 1.0, 1.0};
    KernelSpec kernel{0.5, 0.5, 1.0, 0.0};
    auto dataset = GrfSampler(kernel, g, 7).sample(12);
    TrainConfig c = quick_config();

    auto run = [&]() {
        TrainerState state = init_trainer(tiny_fno(), c);
        std::vector<TrainRecord> trace;
        TrainHooks hooks;
        hooks.on_record = [&](const TrainRecord& r) { trace.push_back(r); };
        train(state, dataset, c, kernel, hooks);
        return std::pair{state.params.flat, trace};
    };
    auto [p1, t1] = run();
    auto [p2, t2] = run();
    CHECK(p1 == p2);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) {
        CHECK(t1[i].loss == t2[i].loss);
        CHECK(t1[i].ot_cost == t2[i].ot_cost);
        CHECK(t1[i].lr == t2[i].lr);
    }
}

TEST_CASE("resume from a saved state continues bitwise") {
    GridSpec g{8, 8, 1.0, 1.0};
    KernelSpec kernel{0.5, 0.5, 1.0, 0.0};
    auto dataset = GrfSampler(kernel, g, 9).sample(12);
    TrainConfig c = quick_config();
    c.epochs = 4;

    TrainerState full = init_trainer(tiny_fno(), c);
    TrainerState snapshot;
    c.checkpoint_every = 2;
    TrainHooks hooks;
    hooks.on_checkpoint = [&](const TrainerState& s, int epoch) {
        if (epoch == 1) snapshot = s; // mid-run checkpoint
    };
    train(full, dataset, c, kernel, hooks);

    TrainerState resumed = snapshot; // as if loaded from the checkpoint file
    CHECK(resumed.step == 2 * 3);
    train(resumed, dataset, c, kernel);
    CHECK(resumed.params.flat == full.params.flat);
    CHECK(resumed.adam.m == full.adam.m);
    CHECK(resumed.adam.v == full.adam.v);
    CHECK(resumed.step == full.step);
}

TEST_CASE("loss decreases under training on the linear probe") {
    // Convex probe: linear activations, fixed t, near-degenerate noise so
    // the optimal linear map (u = 2 f_t at t = 0.5) is exactly realizable.
    GridSpec g{16, 16, 6.283185307179586, 6.283185307179586};
    auto toyset = GrfSampler(KernelSpec{0.5, 1.5, 1.0, 0.0}, g, 21).sample(16);
    GrfSampler noise(KernelSpec{0.5, 1.0, 1e-8, 0.0}, g, 77);

    TrainConfig c;
    c.batch_size = 8;
    c.base_lr = 5e-2;
    c.min_lr = 5e-3;
    c.seed = 31;
    c.eval.linear_activations = true;
    TrainerState state = init_trainer(tiny_fno(), c);

    const long total = 200;
    double first = -1.0, last = 0.0;
    for (long s = 0; s < total; ++s) {
        std::vector<const Field*> db;
        for (int i = 0; i < 8; ++i) db.push_back(&toyset[static_cast<std::size_t>((s * 8 + i) % 16)]);
        auto nb = noise.sample(8);
        auto rec = train_step(state, db, nb, {0.5}, c, lr_at(c, s, total));
        if (first < 0) first = rec.loss;
        last = rec.loss;
    }
    CHECK(first > 0.0);
    CHECK(last < 0.1 * first);
}

TEST_CASE("training on nu = mu0 shrinks the learned velocity") {
    // When the target measure equals the noise measure, OT pairing plus
    // regression should learn a velocity much smaller than the raw
    // displacement between independent draws. A smooth kernel keeps the
    // effective dimension low so mini-batch pairing is informative.
    GridSpec g{16, 16, 6.283185307179586, 6.283185307179586};
    KernelSpec kernel{0.5, 6.283185307179586, 1.0, 0.0};
    auto dataset = GrfSampler(kernel, g, 41).sample(128);

    FnoConfig fno;
    fno.n_layers = 2;
    fno.modes = 4;
    fno.width = 8;
    fno.lift_dim = 16;
    fno.proj_dim = 16;

    TrainConfig c;
    c.batch_size = 32;
    c.epochs = 100; // 4 steps/epoch -> 400 steps
    c.base_lr = 6e-3;
    c.min_lr = 2e-4;
    c.seed = 43;
    c.workers = 2;
    c.f32 = true;
    TrainerState state = init_trainer(fno, c);
    train(state, dataset, c, kernel);

    GrfSampler held_out(kernel, g, 999);
    double vel_norm = 0.0, disp_norm = 0.0;
    Rng trng(1001);
    for (int trial = 0; trial < 32; ++trial) {
        auto f0 = held_out.sample();
        auto f1 = held_out.sample();
        const double t = trng.uniform();
        auto ps = interpolate(PathKind::ot_displacement(), f0, f1, t);
        vel_norm += norm(fno_forward(state.params, t, ps.f_t));
        disp_norm += norm(ps.v_target);
    }
    CHECK(vel_norm < 0.2 * disp_norm);
}

TEST_CASE("config validation") {
    TrainConfig c = quick_config();
    c.batch_size = 1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument); // OT needs >= 2
    c = quick_config();
    c.warmup_frac = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = quick_config();
    c.min_lr = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);

    GridSpec g{8, 8, 1.0, 1.0};
    KernelSpec kernel{0.5, 0.5, 1.0, 0.0};
    TrainerState state = init_trainer(tiny_fno(), quick_config());
    CHECK_THROWS_AS(train(state, {}, quick_config(), kernel), std::invalid_argument);
}
