#include "otfm/grf.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace otfm {

namespace {
const double kSqrtHalf = 0.70710678118654752440;
}

void KernelSpec::validate() const {
    if (!(nu > 0.0)) throw std::invalid_argument("KernelSpec: nu must be positive");
    if (!(length_scale > 0.0)) throw std::invalid_argument("KernelSpec: length_scale must be positive");
    if (!(variance > 0.0)) throw std::invalid_argument("KernelSpec: variance must be positive");
}

double GrfSampler::density_unscaled(double k_magnitude) const {
    // Matern spectral density in d = 2, up to a constant:
    // S(k) ~ (2*nu/l^2 + k^2)^-(nu + 1). For nu = 0.5 the exponent is -3/2.
    const double c = 2.0 * kernel_.nu / (kernel_.length_scale * kernel_.length_scale);
    return std::pow(c + k_magnitude * k_magnitude, -(kernel_.nu + 1.0));
}

double GrfSampler::density_folded(double kx, double ky) const {
    // Alias-folded density: the grid samples a periodized continuum field,
    // so the eigenvalue of the discrete covariance at mode k is the sum of
    // the continuum density over all alias images k + j*K. Without folding,
    // the nu = 0.5 density's slow k^-3 tail is truncated at the Nyquist
    // shell, which visibly distorts short-range correlations on coarse
    // grids. Rings beyond kFoldRings are closed with the integral tail.
    const double kx_step = 6.283185307179586 * grid_.nx / grid_.lx;
    const double ky_step = 6.283185307179586 * grid_.ny / grid_.ly;
    const int rings = 48;
    double acc = 0.0;
    for (int jy = -rings; jy <= rings; ++jy)
        for (int jx = -rings; jx <= rings; ++jx)
            acc += density_unscaled(std::hypot(kx + jx * kx_step, ky + jy * ky_step));
    const double c = 2.0 * kernel_.nu / (kernel_.length_scale * kernel_.length_scale);
    const double r_cut = (rings - 0.5) * std::min(kx_step, ky_step);
    const double tail = 3.141592653589793 / (kernel_.nu * std::pow(c + r_cut * r_cut, kernel_.nu));
    return acc + tail / (kx_step * ky_step);
}

GrfSampler::GrfSampler(const KernelSpec& kernel, const GridSpec& grid, std::uint64_t seed)
    : kernel_(kernel), grid_(grid), base_(seed) {
    kernel_.validate();
    grid_.validate();

    const auto kx = wavenumbers_x(grid_);
    const auto ky = wavenumbers_y(grid_);
    const int ncols = grid_.nx / 2 + 1;
    amplitude_.assign(static_cast<std::size_t>(grid_.ny) * ncols, 0.0);

    double weighted_sum = 0.0;
    for (int j = 0; j < grid_.ny; ++j) {
        for (int i = 0; i < ncols; ++i) {
            const double s = density_folded(kx[static_cast<std::size_t>(i)], ky[static_cast<std::size_t>(j)]);
            amplitude_[static_cast<std::size_t>(j) * ncols + i] = s; // density for now
            weighted_sum += spectrum_mode_weight(grid_, i) * s;
        }
    }

    // Rescale so the nodewise variance equals kernel.variance exactly:
    // sum over the full spectrum of amp^2 must equal variance * (nx*ny)^2.
    const double n = static_cast<double>(grid_.num_nodes());
    density_scale_ = kernel_.variance * n * n / weighted_sum;
    for (auto& a : amplitude_) a = std::sqrt(density_scale_ * a);

    const double k_nyquist = 6.283185307179586 * std::min(grid_.nx / (2.0 * grid_.lx), grid_.ny / (2.0 * grid_.ly));
    const double k_first = 6.283185307179586 / std::max(grid_.lx, grid_.ly);
    if (density_unscaled(k_nyquist) > 0.01 * density_unscaled(k_first)) {
        underresolved_ = true;
        std::fprintf(stderr,
                     "GrfSampler warning: spectrum under-resolved at %s for length_scale=%g "
                     "(Nyquist density above 1%% of the first mode)\n",
                     grid_.describe().c_str(), kernel_.length_scale);
    }
}

Field GrfSampler::sample_at(std::uint64_t index) const {
    Rng rng = base_.stream("grf.sample", index);
    SpectralField s(grid_);
    const int nx = grid_.nx, ny = grid_.ny;
    const int ncols = nx / 2 + 1;

    // Fill the half spectrum in fixed row-major order. Interior kx columns
    // hold free complex draws (their conjugate mirror is implicit); the
    // kx = 0 and kx = nx/2 columns live entirely in the stored array, so
    // conjugate pairs in ky are made explicit and self-conjugate modes get
    // real draws. Every full-spectrum mode k ends up with E|coeff(k)|^2 =
    // amp(k)^2, which makes the nodewise variance exact.
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < ncols; ++i) {
            const double amp = amplitude_[static_cast<std::size_t>(j) * ncols + i];
            const bool boundary_col = (i == 0 || i == nx / 2);
            if (!boundary_col) {
                s.at(i, j) = amp * std::complex<double>(kSqrtHalf * rng.gaussian(), kSqrtHalf * rng.gaussian());
                continue;
            }
            const bool self_conjugate = (j == 0 || j == ny / 2);
            if (self_conjugate) {
                s.at(i, j) = std::complex<double>(amp * rng.gaussian(), 0.0);
            } else if (j < ny / 2) {
                const std::complex<double> z(kSqrtHalf * rng.gaussian(), kSqrtHalf * rng.gaussian());
                s.at(i, j) = amp * z;
                s.at(i, ny - j) = amp * std::conj(z);
            } // j > ny/2 already written by its mirror
        }
    }

    Field f = inverse_transform(s);
    if (kernel_.mean != 0.0)
        for (auto& v : f.values) v += kernel_.mean;
    return f;
}

Field GrfSampler::sample() { return sample_at(counter_++); }

std::vector<Field> GrfSampler::sample(int count) {
    if (count < 1) throw std::invalid_argument("GrfSampler::sample: count must be >= 1");
    std::vector<Field> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(sample());
    return out;
}

double GrfSampler::log_spectral_density(double k_magnitude) const {
    if (!(k_magnitude > 0.0))
        throw std::invalid_argument("log_spectral_density: k must be positive (k=0 excluded)");
    return std::log(density_scale_) + std::log(density_unscaled(k_magnitude));
}

double GrfSampler::implied_correlation(int dx_nodes, int dy_nodes) const {
    const auto kx = wavenumbers_x(grid_);
    const auto ky = wavenumbers_y(grid_);
    const int ncols = grid_.nx / 2 + 1;
    const double px = dx_nodes * grid_.dx();
    const double py = dy_nodes * grid_.dy();
    double cov = 0.0, var = 0.0;
    for (int j = 0; j < grid_.ny; ++j) {
        for (int i = 0; i < ncols; ++i) {
            const double a2 = amplitude_[static_cast<std::size_t>(j) * ncols + i] *
                              amplitude_[static_cast<std::size_t>(j) * ncols + i] *
                              spectrum_mode_weight(grid_, i);
            cov += a2 * std::cos(kx[static_cast<std::size_t>(i)] * px + ky[static_cast<std::size_t>(j)] * py);
            var += a2;
        }
    }
    return cov / var;
}

} // namespace otfm
