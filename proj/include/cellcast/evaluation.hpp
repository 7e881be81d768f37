#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellcast/adaptive.hpp"
#include "cellcast/kmeans.hpp"
#include "cellcast/predictor.hpp"
#include "cellcast/timeseries.hpp"

namespace cellcast {

// Chance-corrected agreement between two labelings of the same items, in
// [-1, 1] with 1 for identical partitions. Degenerate cases where both
// partitions are trivially equal (single item, or the correction denominator
// vanishes) score 1.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// Attaches the handover feature channels (when the raw sources are present),
// min-max scales every channel per cell, and appends the peak-hour and
// weekend flags. This is the training-side preprocessing used throughout.
std::vector<TimeSeries> preprocess_cells(const std::vector<TimeSeries>& cells,
                                         const std::string& handover_in = "ho_in",
                                         const std::string& handover_out = "ho_out");

struct ProtocolOptions {
    SeasonalityConfig season;
    DtwParams dtw;
    int k = 4;
    int kmeans_max_iter = 100;
    int dba_max_iter = 30;
    double dba_tol = 1e-5;
    FeatureVariant variant = FeatureVariant::uni;
    PredictorSpec predictor;  // kind and hidden_size are honored; window,
                              // horizon, features, and seed are derived
    TrainingProtocol protocol;
    int cadence = 1;
    AssignMode mode = AssignMode::trailing;
    bool with_ood = false;
    double ood_quantile = 0.99;
    int ood_buffer_min = 3;
    std::uint64_t seed = 0;
    std::string handover_in = "ho_in";
    std::string handover_out = "ho_out";
    double pearson_threshold = 0.9;
    int ran_channels = 5;
};

struct ProtocolResult {
    FeatureConfig feature_config;
    ClusterModel cluster;
    std::map<int, PredictorModel> models;
    SegmentSet training_segments;
    std::optional<OodPolicy> ood_policy;
    AssignmentTrace trace;
    EvaluationReport report;
    std::vector<std::string> warnings;
};

// The full held-out-cell protocol: preprocess the training cells, resolve the
// feature variant, cluster their day segments, train per-cluster predictors,
// then stream the raw held-out cell as an unseen cell and score the trace.
// Every training segment and window is provenance-audited against the
// held-out id; a match is a logic error.
ProtocolResult run_protocol(const std::vector<TimeSeries>& train_cells,
                            const TimeSeries& holdout, const ProtocolOptions& options);

struct BaselineResult {
    double baseline_mae = 0.0;   // single-cluster model trained on one cell
    double framework_mae = 0.0;  // adaptive framework on the same test cell
    double ratio = 0.0;          // framework / baseline
};

// Trains a k=1 model on `train_cell` alone and streams `test_cell` through
// it. `framework_mae` is the adaptive framework's score on the same test
// cell, reported alongside. Training on the test cell itself is allowed; the
// training copy is renamed so the provenance audit still holds.
BaselineResult baseline_single_cell(const TimeSeries& train_cell,
                                    const TimeSeries& test_cell, double framework_mae,
                                    const ProtocolOptions& base);

struct SweepRow {
    int k = 0;
    std::string config;
    std::string metric;
    double value = 0.0;
};

// Long-format result table over k values x feature configs: weighted_mae,
// overall_mae, and fallback_mae per run, plus one single-cell baseline per
// config (trained on the first training cell, compared against the largest
// k's score).
std::vector<SweepRow> sweep_k(const std::vector<TimeSeries>& train_cells,
                              const TimeSeries& holdout,
                              const std::vector<int>& k_values,
                              const std::vector<FeatureVariant>& variants,
                              const ProtocolOptions& base);

// k,config,metric,value rows; NaN prints as nan.
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

std::string sweep_to_json(const std::vector<SweepRow>& rows);

}  // namespace cellcast
