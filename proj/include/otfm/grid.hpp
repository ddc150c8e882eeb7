#pragma once

#include <complex>
#include <string>
#include <vector>

namespace otfm {

// Uniform periodic 2D grid. nx/ny are point counts (even, >= 4), lx/ly the
// physical domain lengths.
struct GridSpec {
    int nx = 0;
    int ny = 0;
    double lx = 0.0;
    double ly = 0.0;

    bool operator==(const GridSpec&) const = default;

    int num_nodes() const { return nx * ny; }
    // Quadrature weight of one node; makes dot/norm approximate the L2
    // inner product of the underlying functions, so values are comparable
    // across resolutions.
    double cell_weight() const { return lx * ly / static_cast<double>(nx * ny); }
    double dx() const { return lx / nx; }
    double dy() const { return ly / ny; }

    void validate() const;
    std::string describe() const;
};

// Scalar function sampled on a grid, row-major with y-major rows:
// values[iy*nx + ix].
struct Field {
    GridSpec grid;
    std::vector<double> values;

    Field() = default;
    explicit Field(const GridSpec& g) : grid(g), values(static_cast<std::size_t>(g.num_nodes()), 0.0) {}

    double& at(int ix, int iy) { return values[static_cast<std::size_t>(iy) * grid.nx + ix]; }
    double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * grid.nx + ix]; }
};

// Half-spectrum of a real field: coeffs[ky*(nx/2+1) + kx] for kx in
// [0, nx/2], ky in FFT order (0..ny-1 standing for [0..ny/2, -ny/2+1..-1]).
// Convention: unnormalized forward transform, 1/(nx*ny) applied on inverse.
struct SpectralField {
    GridSpec grid;
    std::vector<std::complex<double>> coeffs;

    SpectralField() = default;
    explicit SpectralField(const GridSpec& g)
        : grid(g), coeffs(static_cast<std::size_t>(g.ny) * (g.nx / 2 + 1)) {}

    int ncols() const { return grid.nx / 2 + 1; }
    std::complex<double>& at(int kx, int ky) { return coeffs[static_cast<std::size_t>(ky) * ncols() + kx]; }
    std::complex<double> at(int kx, int ky) const { return coeffs[static_cast<std::size_t>(ky) * ncols() + kx]; }
};

Field make_constant(const GridSpec& grid, double value);

// Rejects non-finite input, naming the first offending index.
SpectralField forward_transform(const Field& f);
Field inverse_transform(const SpectralField& s);

// Signed FFT-ordered wavenumbers scaled by 2*pi/l; the Nyquist entry takes
// the negative convention (index n/2 -> -n/2).
std::vector<int> wavenumber_indices(int n);
std::vector<double> wavenumbers_x(const GridSpec& grid);
std::vector<double> wavenumbers_y(const GridSpec& grid);

// |f_hat(k)|^2 accumulated over the implicit full spectrum: interior kx
// columns count twice (their conjugate mirrors), kx = 0 and nx/2 once.
double spectrum_mode_weight(const GridSpec& grid, int kx);

// Weighted grid inner product and friends; grids must match.
double dot(const Field& a, const Field& b);
double norm(const Field& f);
void axpy(double alpha, const Field& x, Field& y);
void scale(Field& f, double alpha);
Field linear_combination(double a, const Field& x, double b, const Field& y);

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* context);

} // namespace otfm
