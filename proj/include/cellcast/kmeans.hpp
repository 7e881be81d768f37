#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cellcast/dba.hpp"
#include "cellcast/dtw.hpp"
#include "cellcast/timeseries.hpp"

namespace cellcast {

struct ClusterModel {
    int k = 0;
    int n = 0;  // segment length
    std::vector<Barycenter> centroids;
    std::vector<int> assignments;  // segment index -> cluster index
    std::vector<int> sizes;        // member count per cluster
    double inertia = 0.0;          // total squared DTW to assigned centroids
    std::uint64_t seed = 0;
    int iterations_run = 0;
    DtwParams params;
    std::vector<double> inertia_history;  // after each Lloyd iteration
};

// Lloyd-style K-means with DTW assignment and DBA centroid updates.
// Initialization is k-means++ seeding on DTW distances; empty clusters are
// repaired by promoting the segment farthest from its centroid to a fresh
// singleton. Each start stops on an assignment fixpoint or `max_iter`; the
// best of `restarts` starts by final inertia is returned (first on ties),
// start r drawing its seeding from mix_seed(seed, r).
ClusterModel fit(const SegmentSet& segments, int k, const DtwParams& params = {},
                 int max_iter = 100, std::uint64_t seed = 0,
                 int dba_max_iter = 30, double dba_tol = 1e-5, int restarts = 10);

// Same Lloyd loop from explicit initial centroids (used by the OOD recluster
// path, which seeds from an existing model).
ClusterModel fit_from_centroids(const SegmentSet& segments,
                                std::vector<std::vector<double>> initial_centroids,
                                const DtwParams& params = {}, int max_iter = 100,
                                int dba_max_iter = 30, double dba_tol = 1e-5);

// Nearest centroid by DTW and its distance; ties go to the lowest index.
std::pair<int, double> predict_cluster(const ClusterModel& model,
                                       std::span<const double> window,
                                       const DtwParams& params);

// Per-cluster member counts; sums to the number of assigned segments.
std::vector<int> cluster_sizes(const ClusterModel& model);

// JSON persistence: {k, n, seed, centroids, sizes, inertia, dtw_params}.
std::string cluster_model_to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const std::string& text);

}  // namespace cellcast
