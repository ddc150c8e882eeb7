#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "otfm/grf.hpp"
#include "otfm/grid.hpp"
#include "otfm/neuralop.hpp"

namespace otfm {

// Fixed-step integration of the learned flow on a uniform time grid
// t_k = k / n_steps.
struct IntegratorSpec {
    enum class Scheme { Euler, Rk4 };
    Scheme scheme = Scheme::Euler;
    int n_steps = 1;
    GridSpec grid;

    void validate() const;
    long nfe_per_sample() const { return scheme == Scheme::Euler ? n_steps : 4L * n_steps; }
};

using VelocityFn = std::function<Field(double, const Field&)>;

struct IntegrationResult {
    Field f1;
    long nfe = 0; // instrumented call count, asserted against the formula
};

// Single-trajectory integrator over an arbitrary velocity field (the test
// entry point; the model path below uses the same stepping).
IntegrationResult integrate(const VelocityFn& velocity, const Field& f0, const IntegratorSpec& spec);

struct SampleResult {
    std::vector<Field> fields;
    long nfe_per_sample = 0;
    long total_model_calls = 0; // instrumented
};

// Draw `count` noise functions (sampler.sample_at(noise_offset + i)) and
// integrate them jointly; one batched model evaluation per stage counts as
// one NFE per trajectory.
SampleResult sample_flow(const OperatorParams& params, const IntegratorSpec& spec, const GrfSampler& noise,
                         int count, int workers = 1, bool f32 = false, std::uint64_t noise_offset = 0);

struct SweepEntry {
    IntegratorSpec spec;
    long nfe = 0;
    std::vector<Field> fields;
};

// One ensemble per integrator budget with shared noise draws, so output
// differences isolate integration error.
std::vector<SweepEntry> nfe_sweep(const OperatorParams& params, const GrfSampler& noise,
                                  const std::vector<IntegratorSpec>& specs, int count, int workers = 1,
                                  bool f32 = false);

} // namespace otfm
