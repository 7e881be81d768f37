#include "cellcast/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "cellcast/rng.hpp"

namespace cellcast {

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("adjusted_rand_index: labelings differ in length");
    if (a.empty()) throw std::invalid_argument("adjusted_rand_index: empty labelings");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;

    std::map<std::pair<int, int>, long long> joint;
    std::map<int, long long> rows, cols;
    for (std::size_t i = 0; i < n; ++i) {
        ++joint[{a[i], b[i]}];
        ++rows[a[i]];
        ++cols[b[i]];
    }

    const auto comb2 = [](long long c) {
        return 0.5 * static_cast<double>(c) * static_cast<double>(c - 1);
    };
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [cell, count] : joint) index += comb2(count);
    for (const auto& [label, count] : rows) sum_a += comb2(count);
    for (const auto& [label, count] : cols) sum_b += comb2(count);

    const double total = comb2(static_cast<long long>(n));
    const double expected = sum_a * sum_b / total;
    const double denom = 0.5 * (sum_a + sum_b) - expected;
    // both partitions all-singletons or all-one-cluster: identical by
    // construction, but the correction term vanishes
    if (std::abs(denom) < 1e-12) return 1.0;
    return (index - expected) / denom;
}

std::vector<TimeSeries> preprocess_cells(const std::vector<TimeSeries>& cells,
                                         const std::string& handover_in,
                                         const std::string& handover_out) {
    std::vector<TimeSeries> out;
    out.reserve(cells.size());
    for (const auto& cell : cells) {
        TimeSeries series = cell;
        if (series.has_channel(handover_in) && series.has_channel(handover_out))
            series = attach_handover_features(series, handover_in, handover_out);
        series = normalize(series).first;
        series = engineer_peak_features(series);
        out.push_back(std::move(series));
    }
    return out;
}

ProtocolResult run_protocol(const std::vector<TimeSeries>& train_cells,
                            const TimeSeries& holdout, const ProtocolOptions& options) {
    if (train_cells.empty())
        throw std::invalid_argument("run_protocol: no training cells");
    for (const auto& series : train_cells)
        if (series.cell_id == holdout.cell_id)
            throw std::invalid_argument("run_protocol: held-out cell " + holdout.cell_id +
                                        " appears in the training set");

    const auto processed =
        preprocess_cells(train_cells, options.handover_in, options.handover_out);

    ProtocolResult result;
    result.feature_config =
        resolve_feature_config(options.variant, processed, options.pearson_threshold,
                               options.ran_channels, options.handover_in,
                               options.handover_out);

    std::vector<std::vector<Segment>> per_cell;
    per_cell.reserve(processed.size());
    for (const auto& series : processed)
        per_cell.push_back(segmentize(series, options.season).segments);
    result.training_segments = consolidate(per_cell);

    result.cluster = fit(result.training_segments, options.k, options.dtw,
                         options.kmeans_max_iter, mix_seed(options.seed, 0x434c5553),
                         options.dba_max_iter, options.dba_tol);

    PredictorSpec spec = options.predictor;
    spec.window = options.season.n;
    spec.horizon = options.season.m;
    spec.features = result.feature_config;
    spec.seed = mix_seed(options.seed, 0x50524544);
    auto training = train_per_cluster(result.cluster, processed, spec, options.protocol);
    result.models = std::move(training.models);
    result.warnings = std::move(training.warnings);

    // provenance audit: nothing used for clustering or training may originate
    // from the held-out cell
    for (const auto& seg : result.training_segments)
        if (seg.source_cell == holdout.cell_id)
            throw std::logic_error("provenance audit: training segment from held-out cell " +
                                   holdout.cell_id);
    for (const auto& series : processed)
        for (const auto& w : make_windows(series, result.feature_config,
                                          options.season.n, options.season.m))
            if (w.source_cell == holdout.cell_id)
                throw std::logic_error(
                    "provenance audit: training window from held-out cell " +
                    holdout.cell_id);

    if (options.with_ood)
        result.ood_policy = derive_ood_policy(result.cluster, result.training_segments,
                                              options.ood_quantile, options.ood_buffer_min);

    StreamOptions stream;
    stream.season = options.season;
    stream.cadence = options.cadence;
    stream.mode = options.mode;
    stream.ood = result.ood_policy;
    stream.stats = nullptr;  // the held-out cell is served as unseen
    stream.handover_in_source = options.handover_in;
    stream.handover_out_source = options.handover_out;
    result.trace = run_stream(result.cluster, result.models, holdout, stream);
    result.report = evaluate(result.trace);
    return result;
}

BaselineResult baseline_single_cell(const TimeSeries& train_cell,
                                    const TimeSeries& test_cell, double framework_mae,
                                    const ProtocolOptions& base) {
    ProtocolOptions options = base;
    options.k = 1;
    options.with_ood = false;
    TimeSeries train = train_cell;
    if (train.cell_id == test_cell.cell_id) train.cell_id += "_train_copy";
    const auto run = run_protocol({train}, test_cell, options);

    BaselineResult result;
    result.baseline_mae = run.report.weighted_mae;
    result.framework_mae = framework_mae;
    result.ratio = framework_mae / result.baseline_mae;
    return result;
}

std::vector<SweepRow> sweep_k(const std::vector<TimeSeries>& train_cells,
                              const TimeSeries& holdout,
                              const std::vector<int>& k_values,
                              const std::vector<FeatureVariant>& variants,
                              const ProtocolOptions& base) {
    if (k_values.empty()) throw std::invalid_argument("sweep_k: no k values");
    if (variants.empty()) throw std::invalid_argument("sweep_k: no feature configs");
    if (train_cells.empty()) throw std::invalid_argument("sweep_k: no training cells");

    const int k_max = *std::max_element(k_values.begin(), k_values.end());
    std::vector<SweepRow> rows;
    for (const auto variant : variants) {
        const std::string config = to_string(variant);
        ProtocolOptions options = base;
        options.variant = variant;
        double framework_at_kmax = std::numeric_limits<double>::quiet_NaN();
        for (const int k : k_values) {
            options.k = k;
            const auto run = run_protocol(train_cells, holdout, options);
            rows.push_back({k, config, "weighted_mae", run.report.weighted_mae});
            rows.push_back({k, config, "overall_mae", run.report.overall_mae});
            rows.push_back({k, config, "fallback_mae", run.report.fallback_mae});
            if (k == k_max) framework_at_kmax = run.report.weighted_mae;
        }
        const auto baseline =
            baseline_single_cell(train_cells.front(), holdout, framework_at_kmax, options);
        rows.push_back({k_max, config, "baseline_single_cell_mae", baseline.baseline_mae});
        rows.push_back({k_max, config, "baseline_ratio", baseline.ratio});
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "k,config,metric,value\n";
    char buf[32];
    for (const auto& row : rows) {
        if (std::isnan(row.value))
            std::snprintf(buf, sizeof(buf), "nan");
        else
            std::snprintf(buf, sizeof(buf), "%.12g", row.value);
        out << row.k << ',' << row.config << ',' << row.metric << ',' << buf << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string sweep_to_json(const std::vector<SweepRow>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& row : rows)
        j.push_back({{"k", row.k},
                     {"config", row.config},
                     {"metric", row.metric},
                     {"value", row.value}});
    return j.dump(2);
}

}  // namespace cellcast
