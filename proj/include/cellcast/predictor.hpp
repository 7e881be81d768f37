#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cellcast/kmeans.hpp"
#include "cellcast/timeseries.hpp"

namespace cellcast {

enum class PredictorKind { lstm, seasonal_naive };

std::string to_string(PredictorKind kind);
PredictorKind predictor_kind_from_string(const std::string& s);

struct PredictorSpec {
    PredictorKind kind = PredictorKind::lstm;
    int window = 24;       // past steps fed to the model
    int horizon = 1;       // steps ahead of the window end to predict
    int hidden_size = 48;  // LSTM state width
    FeatureConfig features;
    std::uint64_t seed = 0;
};

struct TrainingProtocol {
    int epochs = 90;
    double lr0 = 0.1;
    double momentum = 0.9;
    int plateau_patience = 10;    // epochs without val improvement before LR cut
    double plateau_factor = 0.1;  // LR multiplier on plateau
    double min_lr = 1e-5;
    int early_stop_patience = 40;
    int batch_size = 32;
    double validation_fraction = 0.15;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

// Trained forecaster. For the LSTM the flat parameter vector is laid out as
// four gate blocks in order input, forget, cell, output — each block W
// (hidden x features, row-major), U (hidden x hidden, row-major), b (hidden)
// — followed by the dense weights (hidden) and dense bias (1). The
// seasonal-naive rule has no parameters.
struct PredictorModel {
    PredictorSpec spec;
    TrainingProtocol protocol;
    std::vector<double> parameters;
    std::vector<EpochStats> train_history;
    int best_epoch = -1;  // 1-based epoch whose parameters were kept
    int cluster_id = -1;  // -1 = trained on all data (global fallback)
};

// One training sample: `input` is window x feature_count, row t holding the
// features at window offset t; target is the output value horizon steps past
// the window end.
struct Window {
    std::vector<std::vector<double>> input;
    double target = 0.0;
    std::string source_cell;
    int target_index = 0;  // absolute index of the target within its series
};

std::size_t lstm_parameter_count(int features, int hidden);

// Stride-1 sliding windows over the series. Feature columns follow
// config.selected_channels order, then the peak flag, then the weekend flag
// (each when enabled); those two are read from the engineered channels. The
// target comes from the series' output channel at window start + n + m - 1.
// A series shorter than n + m yields an empty list.
std::vector<Window> make_windows(const TimeSeries& series, const FeatureConfig& config,
                                 int n, int m);

// LSTM: standard gated recurrence (sigmoid gates, tanh candidate and output
// squash) over the window rows from zero initial state, then an affine map of
// the final hidden state. seasonal_naive: the output-channel value one season
// before the target, i.e. input row horizon-1, column 0.
double forward(const PredictorModel& model,
               const std::vector<std::vector<double>>& input);

// Mini-batch SGD with momentum on MAE loss, gradients by full
// backpropagation through time. Learning rate is cut by plateau_factor after
// plateau_patience epochs without validation improvement (floored at min_lr);
// training stops early after early_stop_patience such epochs. Returns the
// parameters of the best validation epoch. Deterministic given spec.seed.
// Throws on non-finite loss, naming the epoch and learning rate.
PredictorModel train(const PredictorSpec& spec, const TrainingProtocol& protocol,
                     const std::vector<Window>& train_windows,
                     const std::vector<Window>& val_windows);

// Deterministic shuffle-and-split by spec.seed, then train. At least one
// window lands on each side.
PredictorModel train_with_split(const PredictorSpec& spec,
                                const TrainingProtocol& protocol,
                                std::vector<Window> windows);

// Max relative error between the BPTT gradient and central finite differences
// over every parameter, on a freshly initialized model. The fixture must sit
// away from the MAE kink: |prediction - target| > 10 * epsilon, else this
// throws asking for a different fixture.
double gradient_check(const PredictorSpec& spec,
                      const std::vector<std::vector<double>>& input, double target,
                      double epsilon = 1e-5);

struct ClusterTraining {
    std::map<int, PredictorModel> models;  // cluster -> model
    std::vector<int> window_counts;        // per cluster
    std::vector<std::string> warnings;
};

// Trains one model per cluster. A window belongs to the cluster of the day
// segment containing its target (windows whose target falls in a trailing
// partial day are dropped). Clusters with fewer than batch_size windows fall
// back to a single model trained on all windows (cluster_id -1), recorded in
// warnings; if every cluster is degenerate that is an error. Per-cluster
// seeds are derived from spec.seed so sibling models differ.
ClusterTraining train_per_cluster(const ClusterModel& cluster_model,
                                  const std::vector<TimeSeries>& series_set,
                                  const PredictorSpec& spec,
                                  const TrainingProtocol& protocol);

// JSON persistence: {spec, protocol, parameters, train_history, cluster_id}.
std::string predictor_model_to_json(const PredictorModel& model);
PredictorModel predictor_model_from_json(const std::string& text);

}  // namespace cellcast
