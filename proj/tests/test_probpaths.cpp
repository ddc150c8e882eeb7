#include <doctest.h>

#include <cmath>

#include "otfm/grid.hpp"
#include "otfm/probpaths.hpp"
#include "otfm/rng.hpp"

using namespace otfm;

namespace {

Field random_field(const GridSpec& g, Rng& rng) {
    Field f(g);
    for (auto& v : f.values) v = rng.gaussian();
    return f;
}

} // namespace

TEST_CASE("displacement path hits both endpoints and has constant velocity") {
    GridSpec g{8, 8, 1.0, 1.0};
    Rng rng(1);
    auto f0 = random_field(g, rng);
    auto f1 = random_field(g, rng);
    auto kind = PathKind::ot_displacement();

    auto at0 = interpolate(kind, f0, f1, 0.0);
    auto at1 = interpolate(kind, f0, f1, 1.0);
    CHECK(at0.f_t.values == f0.values);
    CHECK(at1.f_t.values == f1.values);

    for (double t : {0.2, 0.5, 0.9}) {
        auto p = interpolate(kind, f0, f1, t);
        for (std::size_t i = 0; i < f0.values.size(); ++i) {
            CHECK(p.f_t.values[i] == doctest::Approx((1 - t) * f0.values[i] + t * f1.values[i]));
            CHECK(p.v_target.values[i] == doctest::Approx(f1.values[i] - f0.values[i]));
        }
    }
}

TEST_CASE("ffm path with sigma_min = 0 coincides with the displacement path") {
    GridSpec g{8, 8, 1.0, 1.0};
    Rng rng(2);
    auto f0 = random_field(g, rng);
    auto f1 = random_field(g, rng);
    auto ot = PathKind::ot_displacement();
    auto ffm0 = PathKind::ffm_gaussian(0.0);
    for (double t : {0.0, 0.3, 0.7, 1.0}) {
        auto a = interpolate(ot, f0, f1, t);
        auto b = interpolate(ffm0, f0, f1, t);
        for (std::size_t i = 0; i < f0.values.size(); ++i) {
            CHECK(a.f_t.values[i] == doctest::Approx(b.f_t.values[i]).epsilon(1e-14));
            CHECK(a.v_target.values[i] == doctest::Approx(b.v_target.values[i]).epsilon(1e-13));
        }
    }
}

TEST_CASE("ffm path matches the hand-evaluated scalar example") {
    // sigma_min = 0.1, t = 0.5, f0 = 2, f1 = 10:
    //   f_t = 0.55*2 + 0.5*10 = 6.1
    //   v   = (0.9/0.55)*(5 - 6.1) + 10 = 8.2
    GridSpec g{4, 4, 1.0, 1.0};
    auto kind = PathKind::ffm_gaussian(0.1);
    auto p = interpolate(kind, make_constant(g, 2.0), make_constant(g, 10.0), 0.5);
    for (double v : p.f_t.values) CHECK(v == doctest::Approx(6.1).epsilon(1e-14));
    for (double v : p.v_target.values) CHECK(v == doctest::Approx(8.2).epsilon(1e-13));
}

TEST_CASE("ffm endpoint gap at t = 1 is bounded by sigma_min * |f0|") {
    GridSpec g{8, 8, 1.0, 1.0};
    Rng rng(3);
    auto f0 = random_field(g, rng);
    auto f1 = random_field(g, rng);
    const double s = 0.25;
    auto p = interpolate(PathKind::ffm_gaussian(s), f0, f1, 1.0);
    Field gap = linear_combination(1.0, p.f_t, -1.0, f1);
    CHECK(norm(gap) <= s * norm(f0) * (1.0 + 1e-12));
}

TEST_CASE("finite-difference velocity consistency") {
    GridSpec g{8, 8, 1.0, 1.0};
    Rng rng(4);
    auto f0 = random_field(g, rng);
    auto f1 = random_field(g, rng);
    CHECK(velocity_consistency_check(PathKind::ot_displacement(), f0, f1) < 1e-10);
    CHECK(velocity_consistency_check(PathKind::ffm_gaussian(0.1), f0, f1) < 1e-6);
    CHECK(velocity_consistency_check(PathKind::ffm_gaussian(0.0), f0, f1) < 1e-10);
}

TEST_CASE("displacement path is affine in t: second differences vanish") {
    GridSpec g{8, 8, 1.0, 1.0};
    Rng rng(5);
    auto f0 = random_field(g, rng);
    auto f1 = random_field(g, rng);
    auto kind = PathKind::ot_displacement();
    for (double t : {0.2, 0.5, 0.8}) {
        const double h = 0.05;
        auto a = interpolate(kind, f0, f1, t - h).f_t;
        auto b = interpolate(kind, f0, f1, t).f_t;
        auto c = interpolate(kind, f0, f1, t + h).f_t;
        Field second = linear_combination(1.0, a, 1.0, c);
        axpy(-2.0, b, second);
        CHECK(norm(second) < 1e-13);
    }
}

TEST_CASE("straight path has minimal discrete kinetic energy among perturbations") {
    GridSpec g{8, 8, 1.0, 1.0};
    Rng rng(6);
    auto f0 = random_field(g, rng);
    auto f1 = random_field(g, rng);
    const int steps = 10;
    const double dt = 1.0 / steps;

    auto kinetic = [&](const std::vector<Field>& path) {
        double acc = 0.0;
        for (int k = 0; k + 1 <= steps; ++k) {
            Field d = linear_combination(1.0 / dt, path[static_cast<std::size_t>(k) + 1], -1.0 / dt, path[static_cast<std::size_t>(k)]);
            acc += dot(d, d) * dt;
        }
        return acc;
    };

    std::vector<Field> straight;
    for (int k = 0; k <= steps; ++k)
        straight.push_back(interpolate(PathKind::ot_displacement(), f0, f1, dt * k).f_t);
    const double base = kinetic(straight);

    for (int trial = 0; trial < 10; ++trial) {
        auto perturbed = straight;
        for (int k = 1; k < steps; ++k) {
            Field bump(g);
            for (auto& v : bump.values) v = 0.2 * rng.gaussian();
            axpy(1.0, bump, perturbed[static_cast<std::size_t>(k)]);
        }
        CHECK(kinetic(perturbed) >= base);
    }
}

TEST_CASE("input validation") {
    GridSpec g{8, 8, 1.0, 1.0};
    Field f0(g), f1(g);
    CHECK_THROWS_AS(interpolate(PathKind::ot_displacement(), f0, f1, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(interpolate(PathKind::ot_displacement(), f0, f1, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(PathKind::ffm_gaussian(1.0), std::invalid_argument);
    CHECK_THROWS_AS(PathKind::ffm_gaussian(-0.2), std::invalid_argument);
    Field other{GridSpec{16, 16, 1.0, 1.0}};
    CHECK_THROWS_AS(interpolate(PathKind::ot_displacement(), f0, other, 0.5), std::invalid_argument);
}
