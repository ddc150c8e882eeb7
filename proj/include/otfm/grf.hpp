#pragma once

#include <cstdint>
#include <vector>

#include "otfm/grid.hpp"
#include "otfm/rng.hpp"

namespace otfm {

// Matern covariance parameters of the reference Gaussian measure. nu = 0.5
// is the exponential kernel exp(-r/l).
struct KernelSpec {
    double nu = 0.5;
    double length_scale = 1.0;
    double variance = 1.0;
    double mean = 0.0;

    void validate() const;
};

// Samples stationary Gaussian random fields by diagonalizing the covariance
// in the Fourier basis of the torus: amplitude(k)^2 follows the Matern
// spectral density S(|k|), alias-folded over the sampling lattice so the
// discrete covariance matches the periodized kernel at the nodes, and
// globally rescaled so the marginal variance of each node equals
// kernel.variance exactly.
//
// Randomness: each sample index gets its own labeled sub-stream of the
// master seed, so draws are reproducible and independent of how many
// threads consume them.
class GrfSampler {
public:
    GrfSampler(const KernelSpec& kernel, const GridSpec& grid, std::uint64_t seed);

    // Next draw(s) in the deterministic sequence.
    Field sample();
    std::vector<Field> sample(int count);

    // Draw for an explicit sample index; pure given (seed, index).
    Field sample_at(std::uint64_t index) const;

    // log of the realized spectral density amp^2(|k|); k_magnitude must be
    // positive (the k=0 mode is excluded from the diagnostic).
    double log_spectral_density(double k_magnitude) const;

    bool spectrum_underresolved() const { return underresolved_; }
    const KernelSpec& kernel() const { return kernel_; }
    const GridSpec& grid() const { return grid_; }

    // Exact correlation implied by the discrete spectrum between two nodes
    // separated by (dx_nodes, dy_nodes); the oracle for sampling tests.
    double implied_correlation(int dx_nodes, int dy_nodes) const;

private:
    double density_unscaled(double k_magnitude) const;
    double density_folded(double kx, double ky) const;

    KernelSpec kernel_;
    GridSpec grid_;
    std::vector<double> amplitude_; // half-spectrum layout, like SpectralField
    double density_scale_ = 1.0;    // amp^2 = density_scale_ * S_unscaled
    bool underresolved_ = false;
    Rng base_;
    std::uint64_t counter_ = 0;
};

} // namespace otfm
