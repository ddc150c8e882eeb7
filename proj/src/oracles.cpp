#include "otfm/oracles.hpp"

#include <cmath>
#include <stdexcept>
#include <tuple>

#include "otfm/otcouple.hpp"
#include "otfm/quadrature.hpp"
#include "otfm/rng.hpp"

namespace otfm {

void Theorem2Scenario::validate() const {
    if (!(sigma_min > 0.0 && sigma_min < 1.0))
        throw std::invalid_argument("Theorem2Scenario: sigma_min must lie in (0, 1)");
    if (gh_order < 20) throw std::invalid_argument("Theorem2Scenario: gh_order must be >= 20");
    if (gl_order < 2 || n_theta < 2) throw std::invalid_argument("Theorem2Scenario: degenerate orders");
    if (!(weight_a > 0.0 && weight_a < 1.0))
        throw std::invalid_argument("Theorem2Scenario: weight_a must lie in (0, 1)");
}

namespace {

using Vec2 = std::array<double, 2>;

struct LinearModel {
    // u_theta(t, g) = A g + b t + c
    double a[2][2];
    Vec2 b;
    Vec2 c;

    Vec2 eval(double t, const Vec2& g) const {
        return {a[0][0] * g[0] + a[0][1] * g[1] + b[0] * t + c[0],
                a[1][0] * g[0] + a[1][1] * g[1] + b[1] * t + c[1]};
    }
};

double sq(double x) { return x * x; }
double norm2(const Vec2& v) { return v[0] * v[0] + v[1] * v[1]; }

struct LossAccumulator {
    double fcfm = 0.0;
    double ffm = 0.0;
};

struct Theorem2Workspace {
    const Theorem2Scenario& sc;
    QuadratureRule gh;
    QuadratureRule gl;

    Theorem2Workspace(const Theorem2Scenario& scenario, int gh_order)
        : sc(scenario), gh(gauss_hermite(gh_order)), gl(gauss_legendre(scenario.gl_order, 0.0, 1.0)) {}

    // Integrate both losses for each model plus the theta-free constants.
    // Everything is decomposed over the two mixture components; the state
    // integral against component N(mu_a, s_t^2 I) uses the substitution
    // g = mu_a + sqrt(2) s_t x with Gauss-Hermite nodes x.
    void run(const std::vector<LinearModel>& models, std::vector<LossAccumulator>& losses,
             double& c_total, double& marginal_total) const {
        const Vec2 atoms[2] = {sc.atom_a, sc.atom_b};
        const double weights[2] = {sc.weight_a, 1.0 - sc.weight_a};
        const double inv_pi = 1.0 / 3.141592653589793;
        const double s = sc.sigma_min;

        for (std::size_t ti = 0; ti < gl.nodes.size(); ++ti) {
            const double t = gl.nodes[ti];
            const double wt = gl.weights[ti];
            const double sig = 1.0 - (1.0 - s) * t;
            const double rate = (1.0 - s) / sig;

            for (int comp = 0; comp < 2; ++comp) {
                const Vec2 mu{t * atoms[comp][0], t * atoms[comp][1]};
                for (std::size_t qi = 0; qi < gh.nodes.size(); ++qi) {
                    for (std::size_t qj = 0; qj < gh.nodes.size(); ++qj) {
                        const Vec2 g{mu[0] + 1.4142135623730951 * sig * gh.nodes[qi],
                                     mu[1] + 1.4142135623730951 * sig * gh.nodes[qj]};
                        const double wq = weights[comp] * inv_pi * gh.weights[qi] * gh.weights[qj] * wt;

                        // Conditional velocities of both atoms at g.
                        Vec2 ucond[2];
                        for (int a = 0; a < 2; ++a)
                            ucond[a] = {rate * (t * atoms[a][0] - g[0]) + atoms[a][0],
                                        rate * (t * atoms[a][1] - g[1]) + atoms[a][1]};

                        // Mixture responsibilities at g (both components share
                        // the covariance, so only the means enter).
                        double logd[2];
                        for (int a = 0; a < 2; ++a)
                            logd[a] = -(sq(g[0] - t * atoms[a][0]) + sq(g[1] - t * atoms[a][1])) / (2.0 * sig * sig) +
                                      std::log(weights[a]);
                        const double mx = std::max(logd[0], logd[1]);
                        const double e0 = std::exp(logd[0] - mx);
                        const double e1 = std::exp(logd[1] - mx);
                        const double r0 = e0 / (e0 + e1);
                        const Vec2 umarg{r0 * ucond[0][0] + (1.0 - r0) * ucond[1][0],
                                         r0 * ucond[0][1] + (1.0 - r0) * ucond[1][1]};

                        c_total += wq * norm2(ucond[comp]);
                        marginal_total += wq * norm2(umarg);

                        for (std::size_t mi = 0; mi < models.size(); ++mi) {
                            const Vec2 u = models[mi].eval(t, g);
                            losses[mi].fcfm += wq * (sq(u[0] - ucond[comp][0]) + sq(u[1] - ucond[comp][1]));
                            losses[mi].ffm += wq * (sq(u[0] - umarg[0]) + sq(u[1] - umarg[1]));
                        }
                    }
                }
            }
        }
    }
};

std::vector<LinearModel> random_models(int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LinearModel> models(static_cast<std::size_t>(count));
    for (auto& m : models) {
        for (auto& row : m.a)
            for (auto& v : row) v = rng.gaussian();
        for (auto& v : m.b) v = rng.gaussian();
        for (auto& v : m.c) v = rng.gaussian();
    }
    return models;
}

} // namespace

Theorem2Result check_theorem2(const Theorem2Scenario& scenario) {
    scenario.validate();
    const auto models = random_models(scenario.n_theta, scenario.seed);

    auto evaluate = [&](int gh_order) {
        Theorem2Workspace ws(scenario, gh_order);
        std::vector<LossAccumulator> losses(models.size());
        double c_total = 0.0, marginal_total = 0.0;
        ws.run(models, losses, c_total, marginal_total);
        return std::tuple{losses, c_total - marginal_total};
    };

    auto [losses, rhs] = evaluate(scenario.gh_order);
    auto [losses2, rhs2] = evaluate(2 * scenario.gh_order);

    Theorem2Result result;
    result.rhs = rhs;
    double mean_delta = 0.0;
    for (const auto& l : losses) {
        result.delta_per_theta.push_back(l.fcfm - l.ffm);
        mean_delta += l.fcfm - l.ffm;
    }
    mean_delta /= static_cast<double>(losses.size());

    for (std::size_t i = 0; i < losses.size(); ++i)
        for (std::size_t j = i + 1; j < losses.size(); ++j)
            result.spread = std::max(result.spread,
                                     std::abs(result.delta_per_theta[i] - result.delta_per_theta[j]));
    result.identity_gap = std::abs(mean_delta - rhs);

    for (std::size_t i = 0; i < losses.size(); ++i) {
        result.order_doubling_gap = std::max(result.order_doubling_gap, std::abs(losses[i].fcfm - losses2[i].fcfm));
        result.order_doubling_gap = std::max(result.order_doubling_gap, std::abs(losses[i].ffm - losses2[i].ffm));
    }
    result.order_doubling_gap = std::max(result.order_doubling_gap, std::abs(rhs - rhs2));

    result.pass = result.spread < 1e-6 && result.identity_gap < 1e-6 && result.order_doubling_gap < 1e-8;
    return result;
}

void Theorem3Scenario::validate() const {
    if (dim < 1 || dim > 64) throw std::invalid_argument("Theorem3Scenario: dim must lie in [1, 64]");
    if (batch_sizes.empty() || trials < 1) throw std::invalid_argument("Theorem3Scenario: empty sweep");
    for (std::size_t i = 1; i < batch_sizes.size(); ++i)
        if (batch_sizes[i] <= batch_sizes[i - 1])
            throw std::invalid_argument("Theorem3Scenario: batch sizes must be strictly increasing");
}

Theorem3Result check_theorem3(const Theorem3Scenario& scenario) {
    scenario.validate();
    Theorem3Result result;
    result.closed_form = scenario.mean_norm;
    const double shift = scenario.mean_norm / std::sqrt(static_cast<double>(scenario.dim));
    Rng master(scenario.seed);

    for (int b : scenario.batch_sizes) {
        double sum = 0.0, sumsq = 0.0;
        for (int trial = 0; trial < scenario.trials; ++trial) {
            Rng rng = master.stream("thm3", static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(trial));
            std::vector<std::vector<double>> x(static_cast<std::size_t>(b)), y(static_cast<std::size_t>(b));
            for (auto& v : x) {
                v.resize(static_cast<std::size_t>(scenario.dim));
                for (auto& c : v) c = rng.gaussian();
            }
            for (auto& v : y) {
                v.resize(static_cast<std::size_t>(scenario.dim));
                for (auto& c : v) c = shift + rng.gaussian();
            }
            CostMatrix m;
            m.b = b;
            m.entries.resize(static_cast<std::size_t>(b) * b);
            for (int i = 0; i < b; ++i)
                for (int j = 0; j < b; ++j) {
                    double acc = 0.0;
                    for (int k = 0; k < scenario.dim; ++k) acc += sq(x[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] - y[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]);
                    m.at(i, j) = acc;
                }
            const double w2 = std::sqrt(solve_assignment(m).total_cost / b);
            sum += w2;
            sumsq += w2 * w2;
        }
        Theorem3Row row;
        row.batch_size = b;
        row.mean_w2 = sum / scenario.trials;
        row.std_w2 = std::sqrt(std::max(0.0, sumsq / scenario.trials - row.mean_w2 * row.mean_w2));
        row.rel_error = scenario.mean_norm > 0.0
                            ? std::abs(row.mean_w2 - scenario.mean_norm) / scenario.mean_norm
                            : row.mean_w2;
        result.rows.push_back(row);
    }

    result.monotone = true;
    int inversions = 0;
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        if (result.rows[i].rel_error > result.rows[i - 1].rel_error) {
            // Allow one inversion within one standard error of the mean.
            const double se = result.rows[i].std_w2 / std::sqrt(static_cast<double>(scenario.trials)) /
                              std::max(1e-300, scenario.mean_norm);
            if (result.rows[i].rel_error - result.rows[i - 1].rel_error <= se) {
                ++inversions;
            } else {
                result.monotone = false;
            }
        }
    }
    if (inversions > 1) result.monotone = false;
    result.final_below_15 = result.rows.back().rel_error < 0.15;
    return result;
}

} // namespace otfm
