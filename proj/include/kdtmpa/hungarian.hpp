#pragma once

#include "kdtmpa/common.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace kdtmpa {

struct Assignment {
    std::vector<int> column_of_row; ///< row i is matched to column column_of_row[i]
    double total_cost = 0.0;
};

/// Minimum-cost perfect matching on a square matrix (row-major, n x n) by the
/// Hungarian method with row/column potentials, O(n^3).
inline Assignment hungarian(const std::vector<double>& cost, std::size_t n) {
    if (cost.size() != n * n) throw ValidationError("hungarian: cost matrix must be square");
    for (double c : cost)
        if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("hungarian: entries must be finite and non-negative");
    Assignment out;
    if (n == 0) return out;

    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is a virtual start column.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    auto a = [&](std::size_t i, std::size_t j) { return cost[(i - 1) * n + (j - 1)]; };

    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a(i0, j) - u[i0] - v[j];
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
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    out.column_of_row.assign(n, -1);
    for (std::size_t j = 1; j <= n; ++j) out.column_of_row[match[j] - 1] = static_cast<int>(j - 1);
    for (std::size_t i = 0; i < n; ++i) out.total_cost += cost[i * n + static_cast<std::size_t>(out.column_of_row[i])];
    return out;
}

inline Assignment hungarian(const std::vector<std::vector<double>>& matrix) {
    const std::size_t n = matrix.size();
    std::vector<double> flat;
    flat.reserve(n * n);
    for (const auto& row : matrix) {
        if (row.size() != n) throw ValidationError("hungarian: cost matrix must be square");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return hungarian(flat, n);
}

} // namespace kdtmpa
