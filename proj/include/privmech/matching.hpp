#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace privmech {

inline constexpr std::size_t no_match = static_cast<std::size_t>(-1);

// Maximum-weight bipartite matching (Kuhn-Munkres with potentials, O(N^3)).
// Weights must be non-negative; the matrix is padded square with zeros and
// pairs that end up on zero or negative weight are dropped, so the result is
// the best partial matching. Returns col index per row, or no_match.
inline std::vector<std::size_t> max_weight_matching(
    const std::vector<std::vector<double>>& weights) {
    const std::size_t rows = weights.size();
    if (rows == 0) return {};
    const std::size_t cols = weights[0].size();
    for (const auto& r : weights)
        if (r.size() != cols) throw std::invalid_argument("matching: ragged weight matrix");
    if (cols == 0) return std::vector<std::size_t>(rows, no_match);

    const std::size_t n = std::max(rows, cols);
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based, minimization of cost = -weight, padded with 0.
    auto cost = [&](std::size_t i, std::size_t j) -> double {
        if (i - 1 < rows && j - 1 < cols) return -weights[i - 1][j - 1];
        return 0.0;
    };

    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::size_t> match(rows, no_match);
    for (std::size_t j = 1; j <= n; ++j) {
        const std::size_t i = p[j];
        if (i >= 1 && i - 1 < rows && j - 1 < cols && weights[i - 1][j - 1] > 0.0)
            match[i - 1] = j - 1;
    }
    return match;
}

}  // namespace privmech
