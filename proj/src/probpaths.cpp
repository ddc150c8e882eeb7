#include "otfm/probpaths.hpp"

#include <stdexcept>

namespace otfm {

PathKind PathKind::ffm_gaussian(double sigma_min) {
    PathKind k{Variant::FfmGaussian, sigma_min};
    k.validate();
    return k;
}

void PathKind::validate() const {
    if (!(sigma_min >= 0.0 && sigma_min < 1.0))
        throw std::invalid_argument("PathKind: sigma_min must lie in [0, 1)");
}

PathSample interpolate(const PathKind& kind, const Field& f0, const Field& f1, double t) {
    kind.validate();
    require_same_grid(f0.grid, f1.grid, "interpolate");
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("interpolate: t must lie in [0, 1]");

    PathSample out;
    out.t = t;
    if (kind.variant == PathKind::Variant::OtDisplacement) {
        out.f_t = linear_combination(1.0 - t, f0, t, f1);
        out.v_target = linear_combination(-1.0, f0, 1.0, f1);
        return out;
    }
    const double s = kind.sigma_min;
    const double shrink = 1.0 - (1.0 - s) * t;
    out.f_t = linear_combination(shrink, f0, t, f1);
    // On the path, t f1 - f_t = -shrink * f0, so the conditional velocity
    // (1-s)/shrink * (t f1 - f_t) + f1 reduces to f1 - (1-s) f0; this form
    // is regular at t = 1 even when sigma_min = 0.
    out.v_target = linear_combination(-(1.0 - s), f0, 1.0, f1);
    return out;
}

double velocity_consistency_check(const PathKind& kind, const Field& f0, const Field& f1) {
    const double h = 1e-5;
    double worst = 0.0;
    for (int i = 1; i <= 9; ++i) {
        const double t = 0.1 * i;
        const auto mid = interpolate(kind, f0, f1, t);
        const auto hi = interpolate(kind, f0, f1, t + h);
        const auto lo = interpolate(kind, f0, f1, t - h);
        Field fd = linear_combination(0.5 / h, hi.f_t, -0.5 / h, lo.f_t);
        axpy(-1.0, mid.v_target, fd);
        worst = std::max(worst, norm(fd));
    }
    return worst;
}

} // namespace otfm
