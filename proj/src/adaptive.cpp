#include "cellcast/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "cellcast/dba.hpp"

namespace cellcast {

std::string to_string(AssignMode mode) {
    return mode == AssignMode::trailing ? "trailing" : "target-day";
}

AssignMode assign_mode_from_string(const std::string& s) {
    if (s == "trailing") return AssignMode::trailing;
    if (s == "target-day" || s == "target_day") return AssignMode::target_day;
    throw std::invalid_argument("unknown assign mode: " + s + " (trailing|target-day)");
}

OodPolicy derive_ood_policy(const ClusterModel& model, const SegmentSet& training_segments,
                            double quantile, int buffer_min_segments) {
    if (training_segments.empty())
        throw std::invalid_argument("derive_ood_policy: empty training segment set");
    if (quantile <= 0.0 || quantile > 1.0)
        throw std::invalid_argument("derive_ood_policy: quantile must be in (0,1]");
    if (buffer_min_segments < 1)
        throw std::invalid_argument("derive_ood_policy: buffer_min_segments must be >= 1");

    std::vector<double> dists;
    dists.reserve(training_segments.size());
    for (const auto& seg : training_segments)
        dists.push_back(predict_cluster(model, seg.values, model.params).second);
    std::sort(dists.begin(), dists.end());

    const std::size_t n = dists.size();
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(quantile * static_cast<double>(n)));  // nearest-rank, 1-based
    rank = std::clamp<std::size_t>(rank, 1, n);

    OodPolicy policy;
    policy.threshold = std::max(dists[rank - 1], 1e-12);
    char src[48];
    std::snprintf(src, sizeof(src), "train_self_distance_p%g", quantile * 100.0);
    policy.quantile_source = src;
    policy.buffer_min_segments = buffer_min_segments;
    return policy;
}

namespace {

// causal view of one raw channel: fixed training min-max, or a running
// envelope over the stream's own past
struct ChannelView {
    const std::vector<double>* raw = nullptr;
    bool fixed = false;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void absorb(double v) {
        if (fixed) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double at(std::size_t idx) const {
        const double v = (*raw)[idx];
        return hi > lo ? (v - lo) / (hi - lo) : 0.0;
    }
};

std::string map_source(const std::string& channel, const StreamOptions& options) {
    if (channel == kHandoverInChannel) return options.handover_in_source;
    if (channel == kHandoverOutChannel) return options.handover_out_source;
    return channel;
}

}  // namespace

AssignmentTrace run_stream(const ClusterModel& cluster_model,
                           const std::map<int, PredictorModel>& models,
                           const TimeSeries& stream, const StreamOptions& options) {
    const int n = options.season.n;
    const int m = options.season.m;
    if (n < 2 || m < 1) throw std::invalid_argument("run_stream: bad seasonality config");
    if (options.cadence < 1) throw std::invalid_argument("run_stream: cadence must be >= 1");
    if (cluster_model.n != n)
        throw std::invalid_argument("run_stream: cluster model was fit with n=" +
                                    std::to_string(cluster_model.n) + ", stream uses n=" +
                                    std::to_string(n));
    const std::size_t length = stream.length();
    if (length <= static_cast<std::size_t>(n))
        throw std::invalid_argument("run_stream: stream must be longer than one window");
    if (models.empty()) throw std::invalid_argument("run_stream: no predictor models");

    for (const auto& [cluster, model] : models) {
        if (model.spec.window != n || model.spec.horizon != m)
            throw std::invalid_argument(
                "run_stream: model for cluster " + std::to_string(cluster) +
                " expects window/horizon " + std::to_string(model.spec.window) + "/" +
                std::to_string(model.spec.horizon) + ", stream uses " + std::to_string(n) +
                "/" + std::to_string(m));
    }

    // resolve every raw channel any model needs, plus the output channel
    std::set<std::string> sources;
    sources.insert(stream.output_channel);
    for (const auto& [cluster, model] : models)
        for (const auto& name : model.spec.features.selected_channels)
            sources.insert(map_source(name, options));

    std::map<std::string, ChannelView> views;
    for (const auto& src : sources) {
        ChannelView view;
        view.raw = &stream.channel(src);  // throws naming a missing channel
        if (options.stats) {
            const auto it = options.stats->minmax.find(src);
            if (it == options.stats->minmax.end())
                throw std::invalid_argument("run_stream: training stats lack channel " + src);
            view.fixed = true;
            view.lo = it->second.first;
            view.hi = it->second.second;
        }
        views.emplace(src, view);
    }
    const ChannelView& out_view = views.at(stream.output_channel);
    const auto& raw_output = stream.output();

    // running hourly means drive the causal peak flag
    double hour_sum[24] = {0}, hour_cnt[24] = {0};
    double total_sum = 0.0, total_cnt = 0.0;
    auto peak_flag_at = [&](std::int64_t abs_hour) {
        const int h = hour_of_day(abs_hour);
        if (hour_cnt[h] == 0.0 || total_cnt == 0.0) return 0.0;
        return hour_sum[h] / hour_cnt[h] >= total_sum / total_cnt ? 1.0 : 0.0;
    };

    const int k = cluster_model.k;
    const int t0 = n + m - 1;  // first predictable step
    const bool unseen = options.stats == nullptr;

    AssignmentTrace trace;
    trace.cell_id = stream.cell_id;
    trace.n = n;
    trace.cadence = options.cadence;
    trace.mode = options.mode;

    std::vector<double> last_scores(static_cast<std::size_t>(k), 0.0);
    int current = 0;
    bool assigned_once = false;
    std::size_t next_buffer_start = 0;
    std::vector<std::vector<double>> input;
    std::vector<double> assign_window(static_cast<std::size_t>(n));

    for (std::size_t t = 0; t < length; ++t) {
        if (t >= static_cast<std::size_t>(t0)) {
            StepRecord rec;
            rec.step = static_cast<int>(t);

            const bool reevaluate =
                (static_cast<int>(t) - t0) % options.cadence == 0 || !assigned_once;
            if (reevaluate) {
                std::size_t win_start = t - static_cast<std::size_t>(n);
                if (options.mode == AssignMode::target_day) {
                    const std::size_t day = t / static_cast<std::size_t>(n);
                    const std::size_t day_end = (day + 1) * static_cast<std::size_t>(n);
                    if (day_end <= length) win_start = day * static_cast<std::size_t>(n);
                }
                for (int u = 0; u < n; ++u)
                    assign_window[static_cast<std::size_t>(u)] =
                        out_view.at(win_start + static_cast<std::size_t>(u));

                double best = std::numeric_limits<double>::infinity();
                for (int c = 0; c < k; ++c) {
                    const double d = dtw_distance(
                        assign_window, cluster_model.centroids[static_cast<std::size_t>(c)].values,
                        cluster_model.params);
                    last_scores[static_cast<std::size_t>(c)] = d;
                    if (d < best) {
                        best = d;
                        current = c;
                    }
                }
                assigned_once = true;
                rec.reevaluated = true;

                const bool ood_ready = !unseen || t >= 2 * static_cast<std::size_t>(n);
                if (options.ood && ood_ready && best > options.ood->threshold) {
                    rec.ood = true;
                    if (win_start >= next_buffer_start) {
                        Segment seg;
                        seg.source_cell = stream.cell_id;
                        seg.day_index = static_cast<int>(win_start) / n;
                        seg.values = assign_window;
                        trace.ood_buffer.push_back(std::move(seg));
                        next_buffer_start = win_start + static_cast<std::size_t>(n);
                    }
                }
            }
            rec.scores = last_scores;
            rec.chosen = current;

            if (unseen && t < 2 * static_cast<std::size_t>(n)) {
                // envelope too young for the trained model; serve the rule
                rec.fallback = true;
                rec.prediction = out_view.at(t - static_cast<std::size_t>(n));
            } else {
                const auto it = models.find(current);
                if (it == models.end())
                    throw std::runtime_error("run_stream: no model for assigned cluster " +
                                             std::to_string(current));
                const PredictorModel& model = it->second;
                const auto& config = model.spec.features;
                const std::size_t start =
                    t - static_cast<std::size_t>(n) - static_cast<std::size_t>(m) + 1;

                input.assign(static_cast<std::size_t>(n), {});
                for (int u = 0; u < n; ++u) {
                    auto& row = input[static_cast<std::size_t>(u)];
                    row.reserve(static_cast<std::size_t>(config.feature_count()));
                    const std::size_t idx = start + static_cast<std::size_t>(u);
                    for (const auto& name : config.selected_channels)
                        row.push_back(views.at(map_source(name, options)).at(idx));
                    const std::int64_t abs_hour =
                        stream.start_time + static_cast<std::int64_t>(idx);
                    if (config.peak_flag) row.push_back(peak_flag_at(abs_hour));
                    if (config.weekend_flag) row.push_back(is_weekend(abs_hour) ? 1.0 : 0.0);
                }
                rec.prediction = forward(model, input);
            }

            rec.truth = out_view.at(t);
            trace.steps.push_back(std::move(rec));
        }

        // absorb index t only after predicting step t
        for (auto& [src, view] : views) view.absorb((*view.raw)[t]);
        const int h = hour_of_day(stream.start_time + static_cast<std::int64_t>(t));
        hour_sum[h] += raw_output[t];
        hour_cnt[h] += 1.0;
        total_sum += raw_output[t];
        total_cnt += 1.0;
    }
    return trace;
}

EvaluationReport evaluate(const AssignmentTrace& trace) {
    if (trace.steps.empty()) throw std::invalid_argument("evaluate: empty trace");
    const std::size_t k = trace.steps.front().scores.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    EvaluationReport report;
    report.cluster_mae.assign(k, nan);
    report.cluster_counts.assign(k, 0);
    std::vector<double> sums(k, 0.0);
    double fb_sum = 0.0;

    for (const auto& s : trace.steps) {
        if (s.ood) ++report.ood_count;
        const double err = std::abs(s.prediction - s.truth);
        if (s.fallback) {
            fb_sum += err;
            ++report.fallback_count;
            continue;
        }
        if (s.chosen < 0 || static_cast<std::size_t>(s.chosen) >= k)
            throw std::invalid_argument("evaluate: chosen cluster out of range");
        sums[static_cast<std::size_t>(s.chosen)] += err;
        ++report.cluster_counts[static_cast<std::size_t>(s.chosen)];
    }

    int total = 0;
    double flat = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        total += report.cluster_counts[c];
        flat += sums[c];
        if (report.cluster_counts[c] > 0)
            report.cluster_mae[c] = sums[c] / report.cluster_counts[c];
    }
    if (total > 0) {
        double weighted = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            if (report.cluster_counts[c] > 0)
                weighted += (static_cast<double>(report.cluster_counts[c]) / total) *
                            report.cluster_mae[c];
        report.weighted_mae = weighted;
        report.overall_mae = flat / total;
    } else {
        report.weighted_mae = nan;
        report.overall_mae = nan;
    }
    report.fallback_mae = report.fallback_count > 0
                              ? fb_sum / report.fallback_count
                              : nan;
    return report;
}

ReclusterResult ood_recluster(const SegmentSet& original_segments,
                              const SegmentSet& buffered, const ClusterModel& old_model,
                              const DtwParams& params, int buffer_min_segments) {
    if (buffered.empty()) throw std::invalid_argument("ood_recluster: empty buffer");
    if (static_cast<int>(buffered.size()) < buffer_min_segments)
        throw std::invalid_argument("ood_recluster: buffer has " +
                                    std::to_string(buffered.size()) + " segments, needs " +
                                    std::to_string(buffer_min_segments));
    if (old_model.centroids.empty())
        throw std::invalid_argument("ood_recluster: old model has no centroids");

    std::vector<std::vector<double>> buffer_values;
    buffer_values.reserve(buffered.size());
    for (const auto& seg : buffered) buffer_values.push_back(seg.values);
    const Barycenter buffer_center = dba_average(buffer_values);

    ReclusterResult result;
    result.buffer_centroid = buffer_center.values;

    double seed_min = std::numeric_limits<double>::infinity();
    for (const auto& c : old_model.centroids)
        seed_min = std::min(seed_min,
                            dtw_distance(buffer_center.values, c.values, params));
    result.seed_to_nearest_old = seed_min;

    if (old_model.centroids.size() >= 2) {
        double pairwise_min = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < old_model.centroids.size(); ++a)
            for (std::size_t b = a + 1; b < old_model.centroids.size(); ++b)
                pairwise_min = std::min(
                    pairwise_min, dtw_distance(old_model.centroids[a].values,
                                               old_model.centroids[b].values, params));
        result.degenerate = seed_min < 0.25 * pairwise_min;
    } else {
        result.degenerate = seed_min < 1e-9;
    }

    SegmentSet combined = original_segments;
    combined.insert(combined.end(), buffered.begin(), buffered.end());

    std::vector<std::vector<double>> seeds;
    seeds.reserve(old_model.centroids.size() + 1);
    for (const auto& c : old_model.centroids) seeds.push_back(c.values);
    seeds.push_back(buffer_center.values);

    result.model = fit_from_centroids(combined, std::move(seeds), params);
    return result;
}

void write_trace_csv(const AssignmentTrace& trace, const std::string& path) {
    if (trace.steps.empty())
        throw std::invalid_argument("write_trace_csv: empty trace");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);

    const std::size_t k = trace.steps.front().scores.size();
    out << "step";
    for (std::size_t c = 0; c < k; ++c) out << ",score_" << c;
    out << ",chosen,prediction,truth,reevaluated,fallback,ood\n";

    char buf[32];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        return std::string(buf);
    };
    for (const auto& s : trace.steps) {
        out << s.step;
        for (const double score : s.scores) out << ',' << fmt(score);
        out << ',' << s.chosen << ',' << fmt(s.prediction) << ',' << fmt(s.truth) << ','
            << (s.reevaluated ? 1 : 0) << ',' << (s.fallback ? 1 : 0) << ','
            << (s.ood ? 1 : 0) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string evaluation_report_to_json(const EvaluationReport& report) {
    nlohmann::json j;
    j["weighted_mae"] = report.weighted_mae;
    j["overall_mae"] = report.overall_mae;
    j["cluster_mae"] = report.cluster_mae;
    j["cluster_counts"] = report.cluster_counts;
    j["fallback_mae"] = report.fallback_mae;
    j["fallback_count"] = report.fallback_count;
    j["ood_count"] = report.ood_count;
    return j.dump(2);
}

}  // namespace cellcast
