#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace cellcast {

struct DtwParams {
    double q = 2.0;            // cost exponent; distance is (sum |dx|^q)^(1/q)
    std::optional<int> band;   // Sakoe-Chiba radius; unset = unconstrained
};

// Monotone alignment between two sequences. Pairs are 0-based; an admissible
// path starts at (0,0), ends at (|x|-1, |y|-1) and each step increments i, j,
// or both by exactly 1.
struct WarpingPath {
    std::vector<std::pair<int, int>> pairs;
};

// Exact DTW distance by O(|x|*|y|) dynamic programming. Symmetric in its
// arguments. Throws std::invalid_argument on empty input or an infeasible
// band (|len(x) - len(y)| > band).
double dtw_distance(std::span<const double> x, std::span<const double> y,
                    const DtwParams& params = {});

// Distance plus one optimal alignment. Ties during backtracking are broken by
// preferring the diagonal step, then the i-increment, then the j-increment.
std::pair<double, WarpingPath> dtw_path(std::span<const double> x,
                                        std::span<const double> y,
                                        const DtwParams& params = {});

// Pairwise distances: entry (i,j) == dtw_distance(a[i], b[j], params).
std::vector<std::vector<double>> dtw_matrix(
    const std::vector<std::vector<double>>& set_a,
    const std::vector<std::vector<double>>& set_b,
    const DtwParams& params = {});

// Cost of a given path under the same objective, for audits and tests.
double path_cost(std::span<const double> x, std::span<const double> y,
                 const WarpingPath& path, const DtwParams& params = {});

}  // namespace cellcast
