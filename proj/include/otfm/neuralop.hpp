#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "otfm/grid.hpp"

namespace otfm {

// Fourier neural operator shape. Parameters depend only on this config,
// never on the grid, which is what makes cross-resolution evaluation valid.
struct FnoConfig {
    int n_layers = 4;
    int modes = 8;      // retained modes per axis (two corner blocks)
    int width = 32;     // hidden channels
    int lift_dim = 64;
    int proj_dim = 64;

    static constexpr int input_channels = 4; // field, t, x coord, y coord

    void validate() const;
    // Smallest grid edge that can host the retained mode blocks.
    int min_grid_edge() const { return 2 * modes; }
};

// Flat parameter vector plus its config. Layout (in declared order):
//   lifting pair, per-layer {complex spectral blocks, bypass}, projection
//   pair. Gradients use the same shape.
struct OperatorParams {
    FnoConfig config;
    std::vector<double> flat;
};

std::int64_t count_params(const FnoConfig& config);

// Ordered (name, shape) of every parameter tensor; sizes partition the
// flat vector in declared order. Used by the checkpoint format.
std::vector<std::pair<std::string, std::vector<int>>> parameter_shapes(const FnoConfig& config);

// Default initialization: spectral weights complex Gaussian with scale
// 1/(width*modes), pointwise layers uniform with fan-in scaling, final
// projection zeroed so a fresh model is exactly the zero velocity field.
OperatorParams init_params(const FnoConfig& config, std::uint64_t seed);
// Test hook: every tensor random (no zeroed output layer), so gradient
// checks see no structurally dead parameters.
OperatorParams init_params_random(const FnoConfig& config, std::uint64_t seed);

struct EvalOptions {
    // Test hook: replace every activation with the identity, making the
    // whole operator linear.
    bool linear_activations = false;
    // Test hook: zero the coordinate input channels. Used by the
    // spectral-restriction oracle, where the ramp coordinates would differ
    // across resolutions in their aliased high modes.
    bool coord_channels = true;
    // Test hook: bypass the channel-batched spectral engine and use the
    // per-channel reference transforms (always used on non-power-of-two
    // grids).
    bool force_scalar_spectral = false;
};

struct TrainingSample {
    double t = 0.0;
    const Field* f_t = nullptr;
    const Field* v_target = nullptr;
};

Field fno_forward(const OperatorParams& params, double t, const Field& f,
                  const EvalOptions& opts = {});

// Batched forward used by the ODE sampler; set f32 to run the arithmetic in
// single precision.
std::vector<Field> fno_forward_batch(const OperatorParams& params, double t,
                                     const std::vector<Field>& fields, int workers,
                                     bool f32 = false, const EvalOptions& opts = {});

// Batch-mean squared Hilbert-norm loss and exact reverse-mode gradients.
// grads is resized to params.flat.size(). Workers shard the batch; the
// reduction order is fixed, so results are reproducible for a given worker
// count (and bitwise stable for workers = 1).
double fno_loss_and_grad(const OperatorParams& params, const std::vector<TrainingSample>& batch,
                         std::vector<double>& grads, int workers = 1,
                         const EvalOptions& opts = {});

// Single-precision twin of fno_loss_and_grad for the fast training path
// (parameters and gradients stay double at the interface).
double fno_loss_and_grad_f32(const OperatorParams& params, const std::vector<TrainingSample>& batch,
                             std::vector<double>& grads, int workers = 1,
                             const EvalOptions& opts = {});

} // namespace otfm
