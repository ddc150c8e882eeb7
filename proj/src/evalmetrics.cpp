#include "otfm/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace otfm {

namespace {

void require_ensemble(const std::vector<Field>& ensemble, const char* context) {
    if (ensemble.empty()) throw std::invalid_argument(std::string(context) + ": empty ensemble");
    const GridSpec grid = ensemble.front().grid;
    for (const auto& f : ensemble) require_same_grid(f.grid, grid, context);
}

std::pair<double, double> fit_stats(const std::vector<double>& gen, const std::vector<double>& ref) {
    double sse = 0.0, mean = 0.0;
    for (double r : ref) mean += r;
    mean /= static_cast<double>(ref.size());
    double var = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = gen[i] - ref[i];
        sse += d * d;
        var += (ref[i] - mean) * (ref[i] - mean);
    }
    const double rmse = std::sqrt(sse / static_cast<double>(ref.size()));
    const double r2 = 1.0 - sse / var;
    return {r2, rmse};
}

} // namespace

SpectrumCurve radial_spectrum(const std::vector<Field>& ensemble) {
    require_ensemble(ensemble, "radial_spectrum");
    const GridSpec grid = ensemble.front().grid;
    const int kmax = std::min(grid.nx, grid.ny) / 2;
    const auto kyi = wavenumber_indices(grid.ny);
    const double inv_n2 = 1.0 / (static_cast<double>(grid.num_nodes()) * grid.num_nodes());

    std::vector<double> acc(static_cast<std::size_t>(kmax) + 1, 0.0);
    std::vector<double> count(static_cast<std::size_t>(kmax) + 1, 0.0);
    bool counted = false;
    for (const auto& f : ensemble) {
        const auto s = forward_transform(f);
        for (int ky = 0; ky < grid.ny; ++ky) {
            for (int kx = 0; kx <= grid.nx / 2; ++kx) {
                const int shell = static_cast<int>(std::lround(
                    std::hypot(static_cast<double>(kx), static_cast<double>(kyi[static_cast<std::size_t>(ky)]))));
                if (shell < 1 || shell > kmax) continue;
                const double w = spectrum_mode_weight(grid, kx);
                acc[static_cast<std::size_t>(shell)] += w * std::norm(s.at(kx, ky)) * inv_n2;
                if (!counted) count[static_cast<std::size_t>(shell)] += w;
            }
        }
        counted = true;
    }

    SpectrumCurve curve;
    for (int shell = 1; shell <= kmax; ++shell) {
        curve.k_bins.push_back(shell);
        curve.energy.push_back(acc[static_cast<std::size_t>(shell)] /
                               (count[static_cast<std::size_t>(shell)] * static_cast<double>(ensemble.size())));
    }
    return curve;
}

SpectrumCurve directional_spectrum(const std::vector<Field>& ensemble, Axis axis) {
    require_ensemble(ensemble, "directional_spectrum");
    const GridSpec grid = ensemble.front().grid;
    const int kmax = (axis == Axis::X ? grid.nx : grid.ny) / 2;
    const auto kyi = wavenumber_indices(grid.ny);
    const double inv_n2 = 1.0 / (static_cast<double>(grid.num_nodes()) * grid.num_nodes());

    std::vector<double> acc(static_cast<std::size_t>(kmax) + 1, 0.0);
    for (const auto& f : ensemble) {
        const auto s = forward_transform(f);
        for (int ky = 0; ky < grid.ny; ++ky) {
            for (int kx = 0; kx <= grid.nx / 2; ++kx) {
                const int bin = axis == Axis::X ? kx : std::abs(kyi[static_cast<std::size_t>(ky)]);
                if (bin < 1 || bin > kmax) continue;
                acc[static_cast<std::size_t>(bin)] += spectrum_mode_weight(grid, kx) * std::norm(s.at(kx, ky)) * inv_n2;
            }
        }
    }

    SpectrumCurve curve;
    for (int b = 1; b <= kmax; ++b) {
        curve.k_bins.push_back(b);
        curve.energy.push_back(acc[static_cast<std::size_t>(b)] / static_cast<double>(ensemble.size()));
    }
    return curve;
}

std::pair<double, double> log_fit_metrics(const SpectrumCurve& gen, const SpectrumCurve& ref) {
    if (gen.k_bins != ref.k_bins || gen.k_bins.empty())
        throw std::invalid_argument("log_fit_metrics: bins must match and be nonempty");
    std::vector<double> lg(gen.energy.size()), lr(ref.energy.size());
    bool floored = false;
    for (std::size_t i = 0; i < gen.energy.size(); ++i) {
        if (!(ref.energy[i] > 0.0))
            throw std::invalid_argument("log_fit_metrics: reference energies must be positive");
        double e = gen.energy[i];
        if (!(e > 0.0)) {
            e = 1e-300;
            floored = true;
        }
        lg[i] = std::log(e);
        lr[i] = std::log(ref.energy[i]);
    }
    if (floored)
        std::fprintf(stderr, "log_fit_metrics warning: nonpositive generated energy floored at 1e-300\n");
    return fit_stats(lg, lr);
}

void restrict_to_positive_reference(SpectrumCurve& gen, SpectrumCurve& ref, double relative_floor) {
    if (gen.k_bins != ref.k_bins) throw std::invalid_argument("restrict_to_positive_reference: bin mismatch");
    double peak = 0.0;
    for (double e : ref.energy) peak = std::max(peak, e);
    const double floor = relative_floor * peak;
    SpectrumCurve tg, tr;
    for (std::size_t i = 0; i < ref.k_bins.size(); ++i) {
        if (!(ref.energy[i] > floor)) continue;
        tg.k_bins.push_back(gen.k_bins[i]);
        tg.energy.push_back(gen.energy[i]);
        tr.k_bins.push_back(ref.k_bins[i]);
        tr.energy.push_back(ref.energy[i]);
    }
    gen = std::move(tg);
    ref = std::move(tr);
}

void restrict_bins(SpectrumCurve& curve, int k_lo, int k_hi) {
    SpectrumCurve out;
    for (std::size_t i = 0; i < curve.k_bins.size(); ++i) {
        if (curve.k_bins[i] < k_lo || curve.k_bins[i] > k_hi) continue;
        out.k_bins.push_back(curve.k_bins[i]);
        out.energy.push_back(curve.energy[i]);
    }
    curve = std::move(out);
}

namespace {

// Sorted pool of node values; sorting first makes everything downstream
// independent of ensemble order, and thinning picks evenly spaced order
// statistics.
std::vector<double> pooled_sorted(const std::vector<Field>& ensemble, std::size_t max_pool) {
    std::size_t total = 0;
    for (const auto& f : ensemble) total += f.values.size();
    std::vector<double> pool;
    pool.reserve(total);
    for (const auto& f : ensemble) pool.insert(pool.end(), f.values.begin(), f.values.end());
    std::sort(pool.begin(), pool.end());
    if (pool.size() <= max_pool) return pool;
    std::vector<double> thin;
    thin.reserve(max_pool);
    const double stride = static_cast<double>(pool.size()) / static_cast<double>(max_pool);
    for (std::size_t i = 0; i < max_pool; ++i)
        thin.push_back(pool[static_cast<std::size_t>(i * stride)]);
    return thin;
}

DensityCurve evaluate_kde(const std::vector<double>& sorted_values, const std::vector<double>& grid_points) {
    const std::size_t n = sorted_values.size();
    double mean = 0.0;
    for (double v : sorted_values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : sorted_values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);

    const double range = grid_points.back() - grid_points.front();
    double h = std::sqrt(var) * std::pow(static_cast<double>(n), -0.2);
    const double floor = 1e-6 * (range > 0.0 ? range : 1.0);
    if (!(h > floor)) h = floor;

    DensityCurve curve;
    curve.eval_points = grid_points;
    curve.pdf.resize(grid_points.size(), 0.0);
    const double cutoff = 8.0 * h;
    const double inv_h = 1.0 / h;
    const double norm_c = 0.3989422804014327 / (h * static_cast<double>(n));
    for (std::size_t gi = 0; gi < grid_points.size(); ++gi) {
        const double x = grid_points[gi];
        const auto lo = std::lower_bound(sorted_values.begin(), sorted_values.end(), x - cutoff);
        const auto hi = std::upper_bound(sorted_values.begin(), sorted_values.end(), x + cutoff);
        double acc = 0.0;
        for (auto it = lo; it != hi; ++it) {
            const double z = (x - *it) * inv_h;
            acc += std::exp(-0.5 * z * z);
        }
        curve.pdf[gi] = acc * norm_c;
    }
    return curve;
}

} // namespace

KdeResult kde_metrics(const std::vector<Field>& gen, const std::vector<Field>& ref, std::size_t max_pool) {
    require_ensemble(gen, "kde_metrics");
    require_ensemble(ref, "kde_metrics");

    const auto pg = pooled_sorted(gen, max_pool);
    const auto pr = pooled_sorted(ref, max_pool);

    double lo = std::min(pg.front(), pr.front());
    double hi = std::max(pg.back(), pr.back());
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    std::vector<double> grid_points(512);
    for (std::size_t i = 0; i < grid_points.size(); ++i)
        grid_points[i] = lo + (hi - lo) * static_cast<double>(i) / 511.0;

    KdeResult result;
    result.gen = evaluate_kde(pg, grid_points);
    result.ref = evaluate_kde(pr, grid_points);
    const auto [r2, rmse] = fit_stats(result.gen.pdf, result.ref.pdf);
    result.r2 = r2;
    result.rmse = rmse;
    return result;
}

} // namespace otfm
