#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "otfm/grf.hpp"
#include "otfm/grid.hpp"

namespace otfm {

// Kolmogorov flow in vorticity form on the periodic box:
//   w_t + u . grad w = (1/Re) lap w - A n cos(n y),
// with u recovered from the streamfunction. Pseudo-spectral with the 2/3
// dealiasing rule and integrating-factor RK4 in time.
struct KolmogorovConfig {
    GridSpec grid{64, 64, 6.283185307179586, 6.283185307179586};
    double re = 40.0;
    int n_forcing = 4;
    double forcing_amplitude = 1.0;
    double dt = 1e-3;
    double spinup_time = 50.0;
    double snapshot_interval = 1.0;
    int n_snapshots = 0;
    std::uint64_t seed = 0;
    int trajectories = 1;        // independent seeds run (optionally) in parallel
    double init_amplitude = 0.1; // GRF initial-condition scale

    void validate() const;
};

// Single-trajectory solver; exposed for the validation probes.
class VorticitySolver {
public:
    VorticitySolver(const GridSpec& grid, double re_inverse, int n_forcing, double forcing_amplitude,
                    double dt);

    void set_state(const Field& omega); // projects out the mean and dealiases
    Field state() const;
    // Advance by `steps`; the advective CFL bound max|u| dt / dx < 0.5 is
    // checked periodically and on entry.
    void advance(int steps);

    double time() const { return time_; }
    double kinetic_energy() const;  // 0.5 * integral |u|^2
    double enstrophy() const;       // 0.5 * integral w^2
    double energy_input() const;    // integral u . F
    double dissipation() const;     // (1/Re) * integral |grad u|^2 = 2 nu * enstrophy
    double max_velocity() const;
    double max_divergence() const;

private:
    struct Work;
    void rhs(const std::vector<std::complex<double>>& what, std::vector<std::complex<double>>& out) const;
    void velocities(const std::vector<std::complex<double>>& what, std::vector<double>& u,
                    std::vector<double>& v) const;
    void check_cfl(long step) const;

    GridSpec grid_;
    double nu_;
    double dt_;
    int n_forcing_;
    double amplitude_;
    double time_ = 0.0;
    long steps_done_ = 0;
    std::vector<std::complex<double>> what_; // vorticity, half-spectrum
    std::vector<double> kx_, ky_;
    std::vector<char> dealias_;
    std::vector<double> ef_full_, ef_half_; // integrating factors exp(L dt), exp(L dt/2)
    std::vector<std::complex<double>> forcing_;
};

// Vorticity snapshots after spinup, one trajectory per derived seed,
// concatenated in trajectory order (deterministic given the config).
std::vector<Field> simulate_kolmogorov(const KolmogorovConfig& config, int workers = 1);

// Flow diagnostics recomputed from a stored vorticity snapshot.
double flow_energy(const Field& omega);
double flow_enstrophy(const Field& omega);
double flow_energy_input(const Field& omega, int n_forcing, double amplitude);

// I.i.d. GRF draws; when mixture_shift is nonzero each sample's mean is
// +shift with probability mixture_weight and -shift otherwise.
std::vector<Field> make_grf_dataset(const KernelSpec& kernel, const GridSpec& grid, int n,
                                    std::uint64_t seed, double mixture_shift = 0.0,
                                    double mixture_weight = 0.5);

} // namespace otfm
