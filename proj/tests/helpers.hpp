#pragma once

// Test-side oracles, deliberately independent of the library's algorithms.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace testutil {

// DTW by exhaustive enumeration of every admissible warping path — no DP
// table, no memoization. Exponential; keep lengths <= ~7.
inline double brute_force_dtw(std::span<const double> x, std::span<const double> y,
                              double q = 2.0, std::optional<int> band = std::nullopt) {
    const double inf = std::numeric_limits<double>::infinity();
    std::function<double(std::size_t, std::size_t)> best = [&](std::size_t i,
                                                               std::size_t j) -> double {
        if (band && std::llabs(static_cast<long long>(i) - static_cast<long long>(j)) >
                        *band)
            return inf;
        const double cost = std::pow(std::abs(x[i] - y[j]), q);
        if (i + 1 == x.size() && j + 1 == y.size()) return cost;
        double rest = inf;
        if (i + 1 < x.size() && j + 1 < y.size())
            rest = std::min(rest, best(i + 1, j + 1));
        if (i + 1 < x.size()) rest = std::min(rest, best(i + 1, j));
        if (j + 1 < y.size()) rest = std::min(rest, best(i, j + 1));
        return cost + rest;
    };
    const double total = best(0, 0);
    return std::isinf(total) ? total : std::pow(total, 1.0 / q);
}

}  // namespace testutil
