#pragma once

#include <utility>
#include <vector>

#include "otfm/grid.hpp"

namespace otfm {

// Mean per-mode shell energy, averaged over the ensemble; shells are
// nearest-integer index magnitudes, k = 0 excluded.
struct SpectrumCurve {
    std::vector<int> k_bins;
    std::vector<double> energy;
};

struct DensityCurve {
    std::vector<double> eval_points; // 512 shared abscissae
    std::vector<double> pdf;
};

struct MetricsReport {
    double kde_r2 = 0.0, kde_rmse = 0.0;
    double rs_r2 = 0.0, rs_rmse = 0.0;
    double ds_kx_r2 = 0.0, ds_kx_rmse = 0.0;
    double ds_ky_r2 = 0.0, ds_ky_rmse = 0.0;
    long nfe = 0;
};

// Radial spectrum: per field, |f_hat|^2 under full-spectrum accounting
// normalized by (nx*ny)^2, grouped by round(|k_index|) into shells
// 1..min(nx,ny)/2 (each shell averaged over its modes), then averaged over
// the ensemble. Corner modes beyond the last shell are dropped.
SpectrumCurve radial_spectrum(const std::vector<Field>& ensemble);

enum class Axis { X, Y };

// Directional spectrum: bin b sums the energy at |k_axis| = b over the
// other index, bins 1..n_axis/2; the zero line is excluded.
SpectrumCurve directional_spectrum(const std::vector<Field>& ensemble, Axis axis);

// Natural-log R^2 and RMSE between two spectrum curves on identical bins.
// Reference energies must be positive; nonpositive generated energies are
// floored at 1e-300 (with a warning on stderr).
std::pair<double, double> log_fit_metrics(const SpectrumCurve& gen, const SpectrumCurve& ref);

// Drop the bins whose reference energy sits at or below the numerical
// noise floor (relative to the reference's peak shell) from both curves.
// Dealiased solver shells are zero up to transform round-off (~1e-33
// relative), carry no signal, and would otherwise dominate the log fit.
void restrict_to_positive_reference(SpectrumCurve& gen, SpectrumCurve& ref,
                                    double relative_floor = 1e-12);

// Keep only bins in [k_lo, k_hi] (used for shared-shell comparisons across
// resolutions).
void restrict_bins(SpectrumCurve& curve, int k_lo, int k_hi);

struct KdeResult {
    double r2 = 0.0, rmse = 0.0;
    DensityCurve gen, ref;
};

// Gaussian KDE over pooled node values (Scott bandwidth, 512-point shared
// grid spanning both ensembles); R^2/RMSE between the two pdf vectors in
// the linear domain. Pooled values are sorted before any accumulation, so
// the result is invariant to ensemble order; pools beyond max_pool values
// are thinned deterministically.
KdeResult kde_metrics(const std::vector<Field>& gen, const std::vector<Field>& ref,
                      std::size_t max_pool = 1000000);

} // namespace otfm
