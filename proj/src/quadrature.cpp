#include "otfm/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace otfm {

QuadratureRule gauss_hermite(int order) {
    if (order < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
    const int n = order;
    QuadratureRule rule;
    rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
    rule.weights.assign(static_cast<std::size_t>(n), 0.0);

    const double pi_quarter = 0.7511255444649425; // pi^-1/4
    const int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        // Initial guesses for the descending positive roots.
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        } else if (i == 1) {
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * rule.nodes[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * rule.nodes[1];
        } else {
            z = 2.0 * z - rule.nodes[static_cast<std::size_t>(i) - 2];
        }
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Orthonormal Hermite recurrence.
            double p1 = pi_quarter;
            double p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        rule.nodes[static_cast<std::size_t>(i)] = z;
        rule.nodes[static_cast<std::size_t>(n) - 1 - i] = -z;
        rule.weights[static_cast<std::size_t>(i)] = 2.0 / (pp * pp);
        rule.weights[static_cast<std::size_t>(n) - 1 - i] = rule.weights[static_cast<std::size_t>(i)];
    }
    return rule;
}

QuadratureRule gauss_legendre(int order, double a, double b) {
    if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
    const int n = order;
    QuadratureRule rule;
    rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
    rule.weights.assign(static_cast<std::size_t>(n), 0.0);

    const double xm = 0.5 * (b + a);
    const double xl = 0.5 * (b - a);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(3.141592653589793 * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        rule.nodes[static_cast<std::size_t>(i)] = xm - xl * z;
        rule.nodes[static_cast<std::size_t>(n) - 1 - i] = xm + xl * z;
        rule.weights[static_cast<std::size_t>(i)] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        rule.weights[static_cast<std::size_t>(n) - 1 - i] = rule.weights[static_cast<std::size_t>(i)];
    }
    return rule;
}

} // namespace otfm
