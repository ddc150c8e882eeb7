#include "otfm/grid.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "otfm/fft.hpp"

namespace otfm {

void GridSpec::validate() const {
    if (nx < 4 || ny < 4) throw std::invalid_argument("GridSpec: nx and ny must be >= 4");
    if (nx % 2 != 0 || ny % 2 != 0) throw std::invalid_argument("GridSpec: nx and ny must be even");
    if (!(lx > 0.0) || !(ly > 0.0)) throw std::invalid_argument("GridSpec: lx and ly must be positive");
}

std::string GridSpec::describe() const {
    std::ostringstream os;
    os << nx << "x" << ny << " on [" << lx << " x " << ly << "]";
    return os.str();
}

Field make_constant(const GridSpec& grid, double value) {
    Field f(grid);
    for (auto& v : f.values) v = value;
    return f;
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* context) {
    if (!(a == b)) {
        std::ostringstream os;
        os << context << ": grid mismatch (" << a.describe() << " vs " << b.describe() << ")";
        throw std::invalid_argument(os.str());
    }
}

SpectralField forward_transform(const Field& f) {
    f.grid.validate();
    if (f.values.size() != static_cast<std::size_t>(f.grid.num_nodes()))
        throw std::invalid_argument("forward_transform: value count does not match grid");
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        if (!std::isfinite(f.values[i])) {
            std::ostringstream os;
            os << "forward_transform: non-finite value at flat index " << i << " (ix="
               << i % static_cast<std::size_t>(f.grid.nx) << ", iy=" << i / static_cast<std::size_t>(f.grid.nx) << ")";
            throw std::invalid_argument(os.str());
        }
    }
    SpectralField s(f.grid);
    fft::r2c_2d(f.values.data(), f.grid.nx, f.grid.ny, s.coeffs.data());
    return s;
}

Field inverse_transform(const SpectralField& s) {
    s.grid.validate();
    if (s.coeffs.size() != static_cast<std::size_t>(s.grid.ny) * (s.grid.nx / 2 + 1))
        throw std::invalid_argument("inverse_transform: coefficient count does not match grid");
    Field f(s.grid);
    fft::c2r_2d(s.coeffs.data(), s.grid.nx, s.grid.ny, f.values.data());
    const double inv_n = 1.0 / static_cast<double>(s.grid.num_nodes());
    for (auto& v : f.values) v *= inv_n;
    return f;
}

std::vector<int> wavenumber_indices(int n) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = (i <= n / 2 - 1) ? i : i - n;
    if (n % 2 == 0) idx[static_cast<std::size_t>(n / 2)] = -n / 2;
    return idx;
}

static std::vector<double> scaled_indices(int n, double l) {
    const double scale = 6.283185307179586476925286766559 / l;
    auto idx = wavenumber_indices(n);
    std::vector<double> k(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) k[i] = scale * idx[i];
    return k;
}

std::vector<double> wavenumbers_x(const GridSpec& grid) {
    grid.validate();
    return scaled_indices(grid.nx, grid.lx);
}

std::vector<double> wavenumbers_y(const GridSpec& grid) {
    grid.validate();
    return scaled_indices(grid.ny, grid.ly);
}

double spectrum_mode_weight(const GridSpec& grid, int kx) {
    return (kx == 0 || kx == grid.nx / 2) ? 1.0 : 2.0;
}

double dot(const Field& a, const Field& b) {
    require_same_grid(a.grid, b.grid, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) acc += a.values[i] * b.values[i];
    return acc * a.grid.cell_weight();
}

double norm(const Field& f) { return std::sqrt(dot(f, f)); }

void axpy(double alpha, const Field& x, Field& y) {
    require_same_grid(x.grid, y.grid, "axpy");
    for (std::size_t i = 0; i < x.values.size(); ++i) y.values[i] += alpha * x.values[i];
}

void scale(Field& f, double alpha) {
    for (auto& v : f.values) v *= alpha;
}

Field linear_combination(double a, const Field& x, double b, const Field& y) {
    require_same_grid(x.grid, y.grid, "linear_combination");
    Field out(x.grid);
    for (std::size_t i = 0; i < x.values.size(); ++i) out.values[i] = a * x.values[i] + b * y.values[i];
    return out;
}

} // namespace otfm
