#pragma once

#include <vector>

namespace otfm {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Hermite rule for the weight exp(-x^2) on the real line:
// integral f(x) exp(-x^2) dx ~= sum w_i f(x_i), exact for degree 2n-1.
QuadratureRule gauss_hermite(int order);

// Gauss-Legendre rule on [a, b], exact for degree 2n-1.
QuadratureRule gauss_legendre(int order, double a, double b);

} // namespace otfm
