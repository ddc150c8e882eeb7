#pragma once

#include <vector>

#include "otfm/grid.hpp"

namespace otfm {

// Pairwise squared Hilbert-norm costs between two equally sized batches.
struct CostMatrix {
    int b = 0;
    std::vector<double> entries; // row-major b x b

    double at(int i, int j) const { return entries[static_cast<std::size_t>(i) * b + j]; }
    double& at(int i, int j) { return entries[static_cast<std::size_t>(i) * b + j]; }
};

// Optimal permutation pairing source i with target sigma[i], plus the
// minimized total cost.
struct Coupling {
    std::vector<int> sigma;
    double total_cost = 0.0;
};

CostMatrix cost_matrix(const std::vector<Field>& batch0, const std::vector<Field>& batch1);

// Exact linear assignment (Jonker-Volgenant style augmenting rows, O(b^3)).
// Ties are broken deterministically: among permutations whose cost equals
// the optimum exactly, the lexicographically smallest sigma is returned.
Coupling solve_assignment(const CostMatrix& m);

double pairing_cost(const CostMatrix& m, const std::vector<int>& sigma);
double identity_cost(const CostMatrix& m);

// W2 distance between the two empirical measures: sqrt(total_cost / b).
double empirical_w2(const std::vector<Field>& batch0, const std::vector<Field>& batch1);

} // namespace otfm
