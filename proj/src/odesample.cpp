#include "otfm/odesample.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace otfm {

void IntegratorSpec::validate() const {
    if (n_steps < 1) throw std::invalid_argument("IntegratorSpec: n_steps must be >= 1");
    grid.validate();
}

namespace {

void require_finite_state(const Field& f, int step) {
    for (double v : f.values)
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "integrate: non-finite state at step " << step;
            throw std::runtime_error(os.str());
        }
}

} // namespace

IntegrationResult integrate(const VelocityFn& velocity, const Field& f0, const IntegratorSpec& spec) {
    spec.validate();
    require_same_grid(f0.grid, spec.grid, "integrate");
    IntegrationResult result;
    result.f1 = f0;
    const double h = 1.0 / spec.n_steps;
    for (int k = 0; k < spec.n_steps; ++k) {
        const double t = static_cast<double>(k) * h;
        if (spec.scheme == IntegratorSpec::Scheme::Euler) {
            Field v = velocity(t, result.f1);
            ++result.nfe;
            axpy(h, v, result.f1);
        } else {
            Field k1 = velocity(t, result.f1);
            Field s2 = result.f1;
            axpy(0.5 * h, k1, s2);
            Field k2 = velocity(t + 0.5 * h, s2);
            Field s3 = result.f1;
            axpy(0.5 * h, k2, s3);
            Field k3 = velocity(t + 0.5 * h, s3);
            Field s4 = result.f1;
            axpy(h, k3, s4);
            Field k4 = velocity(t + h, s4);
            result.nfe += 4;
            axpy(h / 6.0, k1, result.f1);
            axpy(h / 3.0, k2, result.f1);
            axpy(h / 3.0, k3, result.f1);
            axpy(h / 6.0, k4, result.f1);
        }
        require_finite_state(result.f1, k);
    }
    return result;
}

SampleResult sample_flow(const OperatorParams& params, const IntegratorSpec& spec, const GrfSampler& noise,
                         int count, int workers, bool f32, std::uint64_t noise_offset) {
    spec.validate();
    if (count < 1) throw std::invalid_argument("sample_flow: count must be >= 1");
    require_same_grid(noise.grid(), spec.grid, "sample_flow");

    SampleResult result;
    result.fields.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        result.fields.push_back(noise.sample_at(noise_offset + static_cast<std::uint64_t>(i)));

    const double h = 1.0 / spec.n_steps;
    auto eval = [&](double t, const std::vector<Field>& states) {
        result.total_model_calls += count;
        return fno_forward_batch(params, t, states, workers, f32);
    };
    auto advance = [&](std::vector<Field>& states, const std::vector<Field>& vel, double factor) {
        for (int i = 0; i < count; ++i)
            axpy(factor, vel[static_cast<std::size_t>(i)], states[static_cast<std::size_t>(i)]);
    };

    for (int k = 0; k < spec.n_steps; ++k) {
        const double t = static_cast<double>(k) * h;
        if (spec.scheme == IntegratorSpec::Scheme::Euler) {
            const auto v = eval(t, result.fields);
            advance(result.fields, v, h);
        } else {
            const auto k1 = eval(t, result.fields);
            std::vector<Field> stage = result.fields;
            advance(stage, k1, 0.5 * h);
            const auto k2 = eval(t + 0.5 * h, stage);
            stage = result.fields;
            advance(stage, k2, 0.5 * h);
            const auto k3 = eval(t + 0.5 * h, stage);
            stage = result.fields;
            advance(stage, k3, h);
            const auto k4 = eval(t + h, stage);
            advance(result.fields, k1, h / 6.0);
            advance(result.fields, k2, h / 3.0);
            advance(result.fields, k3, h / 3.0);
            advance(result.fields, k4, h / 6.0);
        }
        for (int i = 0; i < count; ++i) require_finite_state(result.fields[static_cast<std::size_t>(i)], k);
    }
    result.nfe_per_sample = spec.nfe_per_sample();
    if (result.total_model_calls != result.nfe_per_sample * count)
        throw std::logic_error("sample_flow: NFE accounting mismatch");
    return result;
}

std::vector<SweepEntry> nfe_sweep(const OperatorParams& params, const GrfSampler& noise,
                                  const std::vector<IntegratorSpec>& specs, int count, int workers,
                                  bool f32) {
    std::vector<SweepEntry> out;
    for (const auto& spec : specs) {
        SweepEntry e;
        e.spec = spec;
        auto r = sample_flow(params, spec, noise, count, workers, f32, 0);
        e.nfe = r.nfe_per_sample;
        e.fields = std::move(r.fields);
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace otfm
