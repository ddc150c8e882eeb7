#include <doctest.h>

#include <cmath>

#include "otfm/datagen.hpp"
#include "otfm/evalmetrics.hpp"

using namespace otfm;

namespace {
const double kPi = 3.14159265358979323846;
}

TEST_CASE("taylor-green vortices decay at the exact viscous rate") {
    GridSpec g{64, 64, 2.0 * kPi, 2.0 * kPi};
    VorticitySolver solver(g, 1.0 / 100.0, 1, 0.0, 1e-3);
    Field w0(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix)
            w0.at(ix, iy) = 2.0 * std::cos(2.0 * kPi * ix / g.nx) * std::cos(2.0 * kPi * iy / g.ny);
    solver.set_state(w0);
    solver.advance(1000); // t = 1

    const double decay = std::exp(-2.0 / 100.0);
    auto w = solver.state();
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < w.values.size(); ++i) {
        const double expect = w0.values[i] * decay;
        err += (w.values[i] - expect) * (w.values[i] - expect);
        ref += expect * expect;
    }
    CHECK(std::sqrt(err / ref) < 1e-3);

    SUBCASE("temporal error is far below second order in dt") {
        // The diffusion is integrated exactly and the advection term of
        // this state vanishes, so halving dt changes nothing measurable.
        VorticitySolver fine(g, 1.0 / 100.0, 1, 0.0, 5e-4);
        fine.set_state(w0);
        fine.advance(2000);
        auto wf = fine.state();
        double diff = 0.0;
        for (std::size_t i = 0; i < w.values.size(); ++i)
            diff += (wf.values[i] - w.values[i]) * (wf.values[i] - w.values[i]);
        CHECK(std::sqrt(diff / ref) < 1e-12);
    }
}

TEST_CASE("inviscid runs conserve energy and enstrophy") {
    GridSpec g{32, 32, 2.0 * kPi, 2.0 * kPi};
    VorticitySolver solver(g, 0.0, 1, 0.0, 1e-3);
    GrfSampler init(KernelSpec{0.5, kPi / 2.0, 1.0, 0.0}, g, 5);
    solver.set_state(init.sample_at(0));

    const double e0 = solver.kinetic_energy();
    const double z0 = solver.enstrophy();
    solver.advance(100); // t = 0.1
    CHECK(std::abs(solver.kinetic_energy() - e0) / e0 < 1e-6);
    CHECK(std::abs(solver.enstrophy() - z0) / z0 < 1e-6);
}

TEST_CASE("recovered velocities are divergence-free to spectral accuracy") {
    GridSpec g{32, 32, 2.0 * kPi, 2.0 * kPi};
    VorticitySolver solver(g, 1.0 / 40.0, 4, 1.0, 1e-3);
    GrfSampler init(KernelSpec{0.5, kPi / 2.0, 1.0, 0.0}, g, 9);
    solver.set_state(init.sample_at(0));
    solver.advance(200);
    CHECK(solver.max_divergence() < 1e-10);
}

TEST_CASE("cfl violations abort with the step index") {
    GridSpec g{32, 32, 2.0 * kPi, 2.0 * kPi};
    VorticitySolver solver(g, 1.0 / 40.0, 4, 1.0, 0.5); // absurd dt
    GrfSampler init(KernelSpec{0.5, kPi / 2.0, 4.0, 0.0}, g, 1);
    solver.set_state(init.sample_at(0));
    CHECK_THROWS_WITH_AS(solver.advance(200), doctest::Contains("CFL"), std::runtime_error);
}

TEST_CASE("forced chaotic run is statistically stationary and decorrelates") {
    // One shared simulation serves the energy-balance and snapshot
    // diversity checks.
    KolmogorovConfig config;
    config.grid = GridSpec{32, 32, 2.0 * kPi, 2.0 * kPi};
    config.dt = 2e-3;
    config.spinup_time = 40.0;
    config.snapshot_interval = 2.0;
    config.n_snapshots = 80;
    config.seed = 3;
    config.trajectories = 1;
    auto snaps = simulate_kolmogorov(config, 1);
    REQUIRE(snaps.size() == 80);

    // Energy input balances dissipation within 10% (stationarity).
    double input = 0.0, dissipation = 0.0;
    for (const auto& w : snaps) {
        input += flow_energy_input(w, config.n_forcing, config.forcing_amplitude);
        dissipation += 2.0 * (1.0 / config.re) * flow_enstrophy(w);
    }
    CHECK(input / dissipation > 0.9);
    CHECK(input / dissipation < 1.1);

    // Consecutive snapshots decorrelate in total energy.
    std::vector<double> e;
    for (const auto& w : snaps) e.push_back(flow_energy(w));
    double mean = 0.0;
    for (double x : e) mean += x;
    mean /= static_cast<double>(e.size());
    double c0 = 0.0, c1 = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) c0 += (e[i] - mean) * (e[i] - mean);
    for (std::size_t i = 0; i + 1 < e.size(); ++i) c1 += (e[i] - mean) * (e[i + 1] - mean);
    CHECK(c1 / c0 < 0.9);

    // Snapshots carry energy across the resolved shells.
    auto rs = radial_spectrum(snaps);
    CHECK(rs.energy[0] > 0.0);
    CHECK(rs.energy[8] > 0.0);
}

TEST_CASE("trajectory splitting is deterministic and worker-independent") {
    KolmogorovConfig config;
    config.grid = GridSpec{32, 32, 2.0 * kPi, 2.0 * kPi};
    config.dt = 2e-3;
    config.spinup_time = 2.0;
    config.snapshot_interval = 1.0;
    config.n_snapshots = 6;
    config.seed = 11;
    config.trajectories = 3;
    auto a = simulate_kolmogorov(config, 1);
    auto b = simulate_kolmogorov(config, 2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
}

TEST_CASE("grf datasets: determinism and mixtures") {
    GridSpec g{16, 16, 8.0, 8.0};
    KernelSpec kernel{0.5, 1.0, 0.04, 0.0};

    auto a = make_grf_dataset(kernel, g, 8, 4);
    auto b = make_grf_dataset(kernel, g, 8, 4);
    REQUIRE(a.size() == 8);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);

    CHECK_THROWS_AS(make_grf_dataset(kernel, g, 0, 4), std::invalid_argument);

    SUBCASE("equal-weight mixture with shifts +-c is bimodal") {
        const double c = 3.0; // >> sigma = 0.2
        auto mix = make_grf_dataset(kernel, g, 400, 9, c, 0.5);
        int lo = 0, hi = 0, mid = 0;
        for (const auto& f : mix) {
            double mean = 0.0;
            for (double v : f.values) mean += v;
            mean /= static_cast<double>(f.values.size());
            if (mean > c / 2) ++hi;
            else if (mean < -c / 2) ++lo;
            else ++mid;
        }
        CHECK(mid == 0);
        CHECK(lo > 120);
        CHECK(hi > 120);
    }
}
