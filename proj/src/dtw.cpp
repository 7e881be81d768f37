#include "cellcast/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cellcast {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double point_cost(double a, double b, double q) {
    const double d = std::abs(a - b);
    if (q == 2.0) return d * d;
    if (q == 1.0) return d;
    return std::pow(d, q);
}

inline double finish(double accumulated, double q) {
    if (q == 2.0) return std::sqrt(accumulated);
    if (q == 1.0) return accumulated;
    return std::pow(accumulated, 1.0 / q);
}

void check_inputs(std::span<const double> x, std::span<const double> y,
                  const DtwParams& params) {
    if (x.empty() || y.empty())
        throw std::invalid_argument("dtw: empty input sequence");
    if (params.q <= 0.0)
        throw std::invalid_argument("dtw: exponent q must be positive");
    if (params.band) {
        if (*params.band < 0)
            throw std::invalid_argument("dtw: band radius must be >= 0");
        const auto diff = static_cast<long>(x.size()) - static_cast<long>(y.size());
        if (std::abs(diff) > *params.band)
            throw std::invalid_argument(
                "dtw: band " + std::to_string(*params.band) +
                " infeasible for lengths " + std::to_string(x.size()) + " and " +
                std::to_string(y.size()));
    }
}

inline bool in_band(std::size_t i, std::size_t j, const DtwParams& params) {
    if (!params.band) return true;
    const long d = static_cast<long>(i) - static_cast<long>(j);
    return std::abs(d) <= *params.band;
}

}  // namespace

double dtw_distance(std::span<const double> x, std::span<const double> y,
                    const DtwParams& params) {
    check_inputs(x, y, params);
    const std::size_t nx = x.size(), ny = y.size();

    // rolling rows; row index i over x, column j over y
    std::vector<double> prev(ny + 1, kInf), cur(ny + 1, kInf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= nx; ++i) {
        cur[0] = kInf;
        const double xi = x[i - 1];
        for (std::size_t j = 1; j <= ny; ++j) {
            if (!in_band(i - 1, j - 1, params)) {
                cur[j] = kInf;
                continue;
            }
            const double best =
                std::min(prev[j - 1], std::min(prev[j], cur[j - 1]));
            cur[j] = best + point_cost(xi, y[j - 1], params.q);
        }
        std::swap(prev, cur);
    }
    return finish(prev[ny], params.q);
}

std::pair<double, WarpingPath> dtw_path(std::span<const double> x,
                                        std::span<const double> y,
                                        const DtwParams& params) {
    check_inputs(x, y, params);
    const std::size_t nx = x.size(), ny = y.size();

    std::vector<double> acc((nx + 1) * (ny + 1), kInf);
    auto at = [ny](std::size_t i, std::size_t j) -> std::size_t {
        return i * (ny + 1) + j;
    };
    acc[at(0, 0)] = 0.0;
    for (std::size_t i = 1; i <= nx; ++i) {
        const double xi = x[i - 1];
        for (std::size_t j = 1; j <= ny; ++j) {
            if (!in_band(i - 1, j - 1, params)) continue;
            const double best = std::min(acc[at(i - 1, j - 1)],
                                         std::min(acc[at(i - 1, j)], acc[at(i, j - 1)]));
            acc[at(i, j)] = best + point_cost(xi, y[j - 1], params.q);
        }
    }

    WarpingPath path;
    std::size_t i = nx, j = ny;
    path.pairs.emplace_back(static_cast<int>(i) - 1, static_cast<int>(j) - 1);
    while (i > 1 || j > 1) {
        const double diag = (i > 1 && j > 1) ? acc[at(i - 1, j - 1)] : kInf;
        const double up = (i > 1) ? acc[at(i - 1, j)] : kInf;
        const double left = (j > 1) ? acc[at(i, j - 1)] : kInf;
        // tie-break order: diagonal, then i-increment, then j-increment
        if (diag <= up && diag <= left) {
            --i;
            --j;
        } else if (up <= left) {
            --i;
        } else {
            --j;
        }
        path.pairs.emplace_back(static_cast<int>(i) - 1, static_cast<int>(j) - 1);
    }
    std::reverse(path.pairs.begin(), path.pairs.end());
    return {finish(acc[at(nx, ny)], params.q), std::move(path)};
}

std::vector<std::vector<double>> dtw_matrix(
    const std::vector<std::vector<double>>& set_a,
    const std::vector<std::vector<double>>& set_b,
    const DtwParams& params) {
    std::vector<std::vector<double>> out(set_a.size(),
                                         std::vector<double>(set_b.size(), 0.0));
    for (std::size_t i = 0; i < set_a.size(); ++i) {
        for (std::size_t j = 0; j < set_b.size(); ++j) {
            try {
                out[i][j] = dtw_distance(set_a[i], set_b[j], params);
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument("dtw_matrix entry (" + std::to_string(i) +
                                            "," + std::to_string(j) + "): " + e.what());
            }
        }
    }
    return out;
}

double path_cost(std::span<const double> x, std::span<const double> y,
                 const WarpingPath& path, const DtwParams& params) {
    double sum = 0.0;
    for (const auto& [i, j] : path.pairs)
        sum += point_cost(x[static_cast<std::size_t>(i)],
                          y[static_cast<std::size_t>(j)], params.q);
    return finish(sum, params.q);
}

}  // namespace cellcast
