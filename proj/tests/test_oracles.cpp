#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "otfm/oracles.hpp"
#include "otfm/quadrature.hpp"

using namespace otfm;

TEST_CASE("quadrature rules integrate known moments") {
    SUBCASE("Gauss-Hermite") {
        auto rule = gauss_hermite(20);
        double m0 = 0, m2 = 0, m4 = 0, m38 = 0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double x = rule.nodes[i], w = rule.weights[i];
            m0 += w;
            m2 += w * x * x;
            m4 += w * x * x * x * x;
            m38 += w * std::pow(x, 38.0);
        }
        const double sqrt_pi = 1.7724538509055160273;
        CHECK(m0 == doctest::Approx(sqrt_pi).epsilon(1e-13));
        CHECK(m2 == doctest::Approx(0.5 * sqrt_pi).epsilon(1e-13));
        CHECK(m4 == doctest::Approx(0.75 * sqrt_pi).epsilon(1e-13));
        // degree 38 is still exact for a 20-point rule
        double expect = sqrt_pi;
        for (int k = 1; k <= 19; ++k) expect *= (2.0 * k - 1.0) / 2.0;
        CHECK(m38 == doctest::Approx(expect).epsilon(1e-11));
    }
    SUBCASE("Gauss-Legendre") {
        auto rule = gauss_legendre(64, 0.0, 1.0);
        double total = 0, linear = 0, osc = 0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            total += rule.weights[i];
            linear += rule.weights[i] * rule.nodes[i];
            osc += rule.weights[i] * std::cos(3.0 * rule.nodes[i]);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(linear == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(osc == doctest::Approx(std::sin(3.0) / 3.0).epsilon(1e-13));
    }
}

TEST_CASE("theorem 2: default scenario passes every contract") {
    Theorem2Scenario sc;
    auto r = check_theorem2(sc);
    CHECK(r.spread < 1e-6);
    CHECK(r.identity_gap < 1e-6);
    CHECK(r.order_doubling_gap < 1e-8);
    CHECK(r.pass);
    CHECK(std::abs(r.rhs) > 1e-3); // the verified constant is nontrivial
}

TEST_CASE("theorem 2: coincident atoms give a vanishing difference") {
    Theorem2Scenario sc;
    sc.atom_a = {0.5, 0.3};
    sc.atom_b = {0.5, 0.3};
    auto r = check_theorem2(sc);
    for (double d : r.delta_per_theta) CHECK(std::abs(d) < 1e-12);
    CHECK(std::abs(r.rhs) < 1e-12);
}

TEST_CASE("theorem 2: unit-separation atoms satisfy the stated tolerances") {
    // At +-e1 the order-20 rule is past the 1e-8 self-consistency bar, but
    // the theorem-level clauses still hold at 1e-6.
    Theorem2Scenario sc;
    sc.atom_a = {1.0, 0.0};
    sc.atom_b = {-1.0, 0.0};
    auto r = check_theorem2(sc);
    CHECK(r.spread < 1e-6);
    CHECK(r.identity_gap < 1e-6);
}

TEST_CASE("theorem 2: scenario validation") {
    Theorem2Scenario sc;
    sc.sigma_min = 0.0;
    CHECK_THROWS_AS(check_theorem2(sc), std::invalid_argument);
    sc = Theorem2Scenario{};
    sc.gh_order = 10;
    CHECK_THROWS_AS(check_theorem2(sc), std::invalid_argument);
}

TEST_CASE("theorem 3: low-dimensional scenario converges under the 15% bar") {
    Theorem3Scenario sc;
    sc.dim = 4;
    auto r = check_theorem3(sc);
    CHECK(r.closed_form == doctest::Approx(2.0));
    CHECK(r.monotone);
    CHECK(r.final_below_15);
    for (std::size_t i = 1; i < r.rows.size(); ++i)
        CHECK(r.rows[i].mean_w2 <= r.rows[i - 1].mean_w2 * 1.02);
}

TEST_CASE("theorem 3: zero shift decays toward zero") {
    Theorem3Scenario sc;
    sc.dim = 2;
    sc.mean_norm = 0.0;
    sc.batch_sizes = {8, 32, 128};
    auto r = check_theorem3(sc);
    for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i].mean_w2 < r.rows[i - 1].mean_w2);
    CHECK(r.rows.back().mean_w2 < 0.5);
}

TEST_CASE("theorem 3: scenario validation") {
    Theorem3Scenario sc;
    sc.batch_sizes = {8, 8};
    CHECK_THROWS_AS(check_theorem3(sc), std::invalid_argument);
    sc = Theorem3Scenario{};
    sc.dim = 100;
    CHECK_THROWS_AS(check_theorem3(sc), std::invalid_argument);
}
