#pragma once

#include <optional>
#include <vector>

#include "cellcast/dtw.hpp"

namespace cellcast {

struct Barycenter {
    std::vector<double> values;
    double inertia = 0.0;   // sum over members of dtw_distance(member, values)^2
    int iterations_used = 0;
    std::vector<double> inertia_history;  // inertia after each refinement pass
};

// Sum of squared DTW distances from each member to the center.
double dba_inertia(const std::vector<std::vector<double>>& members,
                   std::span<const double> center,
                   const DtwParams& params = {});

// DTW barycenter averaging. Starts from `init` when given, otherwise from the
// medoid (the member with the smallest total DTW distance to the others,
// lowest index on ties). Each pass aligns every member to the current center
// and replaces each center coordinate with the mean of the member values
// mapped to it; stops when the relative inertia improvement drops below `tol`
// or after `max_iter` passes. Inertia is non-increasing across passes.
Barycenter dba_average(const std::vector<std::vector<double>>& members,
                       std::optional<std::vector<double>> init = std::nullopt,
                       int max_iter = 30, double tol = 1e-5,
                       const DtwParams& params = {});

}  // namespace cellcast
