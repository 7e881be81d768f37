#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellcast/kmeans.hpp"
#include "cellcast/predictor.hpp"
#include "cellcast/timeseries.hpp"

namespace cellcast {

// How the assignment window is chosen at a reevaluation step: the trailing
// completed window (causal, default), or the calendar day containing the
// target step (reads values past the prediction point; kept for comparison).
enum class AssignMode { trailing, target_day };

std::string to_string(AssignMode mode);
AssignMode assign_mode_from_string(const std::string& s);

struct OodPolicy {
    double threshold = 0.0;  // distance above this marks a window OOD
    std::string quantile_source = "train_self_distance_p99";
    int buffer_min_segments = 3;  // required before reclustering
};

// Threshold = nearest-rank quantile (default 99th percentile) of every
// training segment's DTW distance to its nearest centroid.
OodPolicy derive_ood_policy(const ClusterModel& model, const SegmentSet& training_segments,
                            double quantile = 0.99, int buffer_min_segments = 3);

struct StepRecord {
    int step = 0;                // stream index being predicted
    std::vector<double> scores;  // assignment-window distance to each centroid
    int chosen = 0;              // argmin of scores, lowest index on ties
    double prediction = 0.0;
    double truth = 0.0;
    bool reevaluated = false;  // scores recomputed at this step
    bool fallback = false;     // served by the warm-up rule, not a cluster model
    bool ood = false;          // reevaluation exceeded the OOD threshold
};

struct AssignmentTrace {
    std::string cell_id;
    int n = 24;
    int cadence = 1;
    AssignMode mode = AssignMode::trailing;
    std::vector<StepRecord> steps;
    SegmentSet ood_buffer;  // non-overlapping flagged windows, normalized
};

struct StreamOptions {
    SeasonalityConfig season;  // n (window/season) and m (horizon)
    int cadence = 1;           // reevaluate every this many steps
    AssignMode mode = AssignMode::trailing;
    std::optional<OodPolicy> ood;
    // Training normalization stats for this cell, or null for an unseen cell.
    // Unseen cells are normalized by a running min-max envelope over the
    // stream's own past, their peak flags come from running hourly means, and
    // their first n predictions are served by the seasonal-naive rule and
    // flagged `fallback` (the envelope is too young to trust an LSTM input).
    const NormStats* stats = nullptr;
    // Raw channels that back the engineered handover features.
    std::string handover_in_source = "ho_in";
    std::string handover_out_source = "ho_out";
};

// Streams a raw (unnormalized) series through the fitted cluster model and
// per-cluster predictors. For each step t from n+m-1 on: every `cadence`
// steps the trailing n-window of normalized output is re-scored against all
// centroids and the nearest cluster adopted; step t is then predicted by the
// current cluster's model from the trailing window, built per that model's
// feature config. Nothing at index >= t is ever read for the prediction at t.
// With an OOD policy, a reevaluation whose best score exceeds the threshold
// flags the step and buffers the (non-overlapping) trailing window.
AssignmentTrace run_stream(const ClusterModel& cluster_model,
                           const std::map<int, PredictorModel>& models,
                           const TimeSeries& stream, const StreamOptions& options);

struct EvaluationReport {
    std::vector<double> cluster_mae;  // NaN for clusters that served no steps
    std::vector<int> cluster_counts;
    double weighted_mae = 0.0;  // count-weighted mean of cluster_mae
    double overall_mae = 0.0;   // flat mean over the same steps (equal by identity)
    double fallback_mae = 0.0;  // warm-up steps, excluded from the above
    int fallback_count = 0;
    int ood_count = 0;
};

// Per-cluster and weighted MAE over the trace's non-fallback steps.
EvaluationReport evaluate(const AssignmentTrace& trace);

struct ReclusterResult {
    ClusterModel model;                   // refit with k_old + 1 clusters
    std::vector<double> buffer_centroid;  // DBA seed built from the buffer
    double seed_to_nearest_old = 0.0;     // DTW from that seed to old centroids
    bool degenerate = false;  // buffer collapses onto an existing centroid
};

// Refits on original + buffered segments with k+1 clusters, seeding the old
// centroids plus the buffer's DBA average. The result is degenerate when that
// seed sits closer to an old centroid than a quarter of the old model's
// minimum centroid separation.
ReclusterResult ood_recluster(const SegmentSet& original_segments,
                              const SegmentSet& buffered, const ClusterModel& old_model,
                              const DtwParams& params, int buffer_min_segments = 1);

// step, score_0..score_{k-1}, chosen, prediction, truth, reevaluated,
// fallback, ood — one row per predicted step.
void write_trace_csv(const AssignmentTrace& trace, const std::string& path);

std::string evaluation_report_to_json(const EvaluationReport& report);

}  // namespace cellcast
