#include "cellcast/dba.hpp"

#include <stdexcept>

namespace cellcast {

namespace {

void check_members(const std::vector<std::vector<double>>& members) {
    if (members.empty())
        throw std::invalid_argument("dba: empty member list");
    const std::size_t n = members.front().size();
    for (const auto& m : members)
        if (m.size() != n)
            throw std::invalid_argument("dba: members have mixed lengths");
}

std::size_t medoid_index(const std::vector<std::vector<double>>& members,
                         const DtwParams& params) {
    std::size_t best = 0;
    double best_total = -1.0;
    for (std::size_t i = 0; i < members.size(); ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < members.size(); ++j) {
            if (i == j) continue;
            total += dtw_distance(members[i], members[j], params);
        }
        if (best_total < 0.0 || total < best_total) {
            best_total = total;
            best = i;
        }
    }
    return best;
}

}  // namespace

double dba_inertia(const std::vector<std::vector<double>>& members,
                   std::span<const double> center, const DtwParams& params) {
    check_members(members);
    double total = 0.0;
    for (const auto& m : members) {
        const double d = dtw_distance(m, center, params);
        total += d * d;
    }
    return total;
}

Barycenter dba_average(const std::vector<std::vector<double>>& members,
                       std::optional<std::vector<double>> init, int max_iter,
                       double tol, const DtwParams& params) {
    check_members(members);
    if (max_iter < 1) throw std::invalid_argument("dba: max_iter must be >= 1");
    if (tol <= 0.0) throw std::invalid_argument("dba: tol must be > 0");

    Barycenter result;
    result.values = init ? std::move(*init) : members[medoid_index(members, params)];
    if (result.values.empty())
        throw std::invalid_argument("dba: empty init sequence");

    double prev_inertia = dba_inertia(members, result.values, params);
    const std::size_t len = result.values.size();

    for (int iter = 1; iter <= max_iter; ++iter) {
        std::vector<double> sums(len, 0.0);
        std::vector<double> counts(len, 0.0);
        for (const auto& m : members) {
            const auto [dist, path] = dtw_path(result.values, m, params);
            (void)dist;
            for (const auto& [ci, mi] : path.pairs) {
                sums[static_cast<std::size_t>(ci)] += m[static_cast<std::size_t>(mi)];
                counts[static_cast<std::size_t>(ci)] += 1.0;
            }
        }
        // every center coordinate is touched by each member's path, so counts
        // are strictly positive
        for (std::size_t i = 0; i < len; ++i) result.values[i] = sums[i] / counts[i];

        const double inertia = dba_inertia(members, result.values, params);
        result.iterations_used = iter;
        result.inertia_history.push_back(inertia);
        result.inertia = inertia;

        if (inertia == 0.0) break;
        const double improvement = (prev_inertia - inertia) / prev_inertia;
        if (improvement < tol) break;
        prev_inertia = inertia;
    }
    return result;
}

}  // namespace cellcast
