#include "otfm/otcouple.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace otfm {

CostMatrix cost_matrix(const std::vector<Field>& batch0, const std::vector<Field>& batch1) {
    if (batch0.empty() || batch0.size() != batch1.size())
        throw std::invalid_argument("cost_matrix: batches must be nonempty and equally sized");
    const int b = static_cast<int>(batch0.size());
    const GridSpec grid = batch0.front().grid;
    for (const auto& f : batch0) require_same_grid(f.grid, grid, "cost_matrix");
    for (const auto& f : batch1) require_same_grid(f.grid, grid, "cost_matrix");

    const double w = grid.cell_weight();
    CostMatrix m;
    m.b = b;
    m.entries.resize(static_cast<std::size_t>(b) * b);
    const std::size_t n = batch0.front().values.size();
    for (int i = 0; i < b; ++i) {
        const double* fi = batch0[static_cast<std::size_t>(i)].values.data();
        for (int j = 0; j < b; ++j) {
            const double* fj = batch1[static_cast<std::size_t>(j)].values.data();
            double acc = 0.0;
            for (std::size_t x = 0; x < n; ++x) {
                const double d = fi[x] - fj[x];
                acc += d * d;
            }
            m.at(i, j) = w * acc;
        }
    }
    return m;
}

namespace {

// Classic shortest-augmenting-path assignment with row/column potentials.
// Returns row->column and fills the dual potentials.
std::vector<int> augmenting_assignment(const CostMatrix& m, std::vector<double>& u, std::vector<double>& v) {
    const int n = m.b;
    u.assign(static_cast<std::size_t>(n) + 1, 0.0);
    v.assign(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> col_row(static_cast<std::size_t>(n) + 1, 0); // matched row per column, 1-based
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        col_row[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = col_row[static_cast<std::size_t>(j0)];
            double delta = std::numeric_limits<double>::infinity();
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = m.at(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(col_row[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (col_row[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            col_row[static_cast<std::size_t>(j0)] = col_row[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> sigma(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (col_row[static_cast<std::size_t>(j)] > 0) sigma[static_cast<std::size_t>(col_row[static_cast<std::size_t>(j)]) - 1] = j - 1;
    return sigma;
}

// Kuhn augmenting search over the tight-edge graph, honoring fixed columns.
bool try_augment(int row, const std::vector<std::vector<int>>& adj, const std::vector<char>& col_fixed,
                 std::vector<int>& col_match, std::vector<char>& visited) {
    for (int j : adj[static_cast<std::size_t>(row)]) {
        if (col_fixed[static_cast<std::size_t>(j)] || visited[static_cast<std::size_t>(j)]) continue;
        visited[static_cast<std::size_t>(j)] = 1;
        if (col_match[static_cast<std::size_t>(j)] < 0 ||
            try_augment(col_match[static_cast<std::size_t>(j)], adj, col_fixed, col_match, visited)) {
            col_match[static_cast<std::size_t>(j)] = row;
            return true;
        }
    }
    return false;
}

// Lexicographically smallest perfect matching within the tight-edge graph
// of an optimal dual pair, seeded from a known optimal matching.
std::vector<int> lex_smallest_tight_matching(const CostMatrix& m, const std::vector<int>& seed,
                                             const std::vector<double>& u, const std::vector<double>& v) {
    const int n = m.b;
    double scale = 0.0;
    for (double c : m.entries) scale = std::max(scale, std::abs(c));
    const double eps = 1e-9 * std::max(1.0, scale);

    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (m.at(i, j) - u[static_cast<std::size_t>(i) + 1] - v[static_cast<std::size_t>(j) + 1] <= eps)
                adj[static_cast<std::size_t>(i)].push_back(j);

    std::vector<int> row_match = seed;
    std::vector<int> col_match(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) col_match[static_cast<std::size_t>(row_match[static_cast<std::size_t>(i)])] = i;
    std::vector<char> col_fixed(static_cast<std::size_t>(n), 0);

    for (int i = 0; i < n; ++i) {
        for (int j : adj[static_cast<std::size_t>(i)]) {
            if (col_fixed[static_cast<std::size_t>(j)]) continue;
            if (row_match[static_cast<std::size_t>(i)] == j) break; // already the smallest reachable
            // Attempt to reroute so that row i uses column j.
            const int displaced = col_match[static_cast<std::size_t>(j)];
            const int old_col = row_match[static_cast<std::size_t>(i)];
            col_match[static_cast<std::size_t>(j)] = i;
            row_match[static_cast<std::size_t>(i)] = j;
            col_match[static_cast<std::size_t>(old_col)] = -1;
            bool ok = true;
            if (displaced >= 0 && displaced != i) {
                std::vector<char> visited(static_cast<std::size_t>(n), 0);
                visited[static_cast<std::size_t>(j)] = 1;
                ok = try_augment(displaced, adj, col_fixed, col_match, visited);
                if (ok) {
                    for (int r = 0; r < n; ++r) row_match[static_cast<std::size_t>(r)] = -1;
                    for (int c = 0; c < n; ++c)
                        if (col_match[static_cast<std::size_t>(c)] >= 0)
                            row_match[static_cast<std::size_t>(col_match[static_cast<std::size_t>(c)])] = c;
                }
            }
            if (ok) break;
            // Revert.
            col_match[static_cast<std::size_t>(old_col)] = i;
            row_match[static_cast<std::size_t>(i)] = old_col;
            col_match[static_cast<std::size_t>(j)] = displaced;
        }
        col_fixed[static_cast<std::size_t>(row_match[static_cast<std::size_t>(i)])] = 1;
    }
    return row_match;
}

} // namespace

double pairing_cost(const CostMatrix& m, const std::vector<int>& sigma) {
    double acc = 0.0;
    for (int i = 0; i < m.b; ++i) acc += m.at(i, sigma[static_cast<std::size_t>(i)]);
    return acc;
}

double identity_cost(const CostMatrix& m) {
    double acc = 0.0;
    for (int i = 0; i < m.b; ++i) acc += m.at(i, i);
    return acc;
}

Coupling solve_assignment(const CostMatrix& m) {
    if (m.b < 1 || m.entries.size() != static_cast<std::size_t>(m.b) * m.b)
        throw std::invalid_argument("solve_assignment: malformed cost matrix");
    for (double c : m.entries)
        if (!std::isfinite(c)) throw std::invalid_argument("solve_assignment: non-finite cost entry");

    std::vector<double> u, v;
    std::vector<int> sigma = augmenting_assignment(m, u, v);
    const double best = pairing_cost(m, sigma);

    // Deterministic tie-break: move to the lexicographically smallest
    // permutation inside the tight-edge graph, but only if its cost is
    // exactly the optimum (guards against epsilon admitting loose edges).
    std::vector<int> lex = lex_smallest_tight_matching(m, sigma, u, v);
    if (pairing_cost(m, lex) == best) sigma = std::move(lex);

    return Coupling{std::move(sigma), best};
}

double empirical_w2(const std::vector<Field>& batch0, const std::vector<Field>& batch1) {
    const auto m = cost_matrix(batch0, batch1);
    const auto coupling = solve_assignment(m);
    return std::sqrt(coupling.total_cost / m.b);
}

} // namespace otfm
