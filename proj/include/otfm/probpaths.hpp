#pragma once

#include "otfm/grid.hpp"

namespace otfm {

// Conditional probability path family. OtDisplacement is the straight
// displacement interpolation with constant velocity; FfmGaussian is the
// Gaussian conditional path with shrink factor sigma_min (at sigma_min = 0
// the two coincide).
struct PathKind {
    enum class Variant { OtDisplacement, FfmGaussian };
    Variant variant = Variant::OtDisplacement;
    double sigma_min = 0.0;

    static PathKind ot_displacement() { return {Variant::OtDisplacement, 0.0}; }
    static PathKind ffm_gaussian(double sigma_min);

    void validate() const;
};

struct PathSample {
    double t = 0.0;
    Field f_t;
    Field v_target;
};

// State and regression-target velocity at time t along the conditional path
// from f0 to f1:
//   OtDisplacement: f_t = (1-t) f0 + t f1,            v = f1 - f0
//   FfmGaussian:    f_t = (1-(1-s)t) f0 + t f1,       v = (1-s)/(1-(1-s)t) (t f1 - f_t) + f1
PathSample interpolate(const PathKind& kind, const Field& f0, const Field& f1, double t);

// Max over a fixed interior t-grid of the Hilbert-norm gap between the
// central finite difference of the interpolant and the stated velocity.
double velocity_consistency_check(const PathKind& kind, const Field& f0, const Field& f1);

} // namespace otfm
