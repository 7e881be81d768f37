#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "cellcast/adaptive.hpp"
#include "cellcast/rng.hpp"

using namespace cellcast;

namespace {

ClusterModel constant_centroid_model(const std::vector<double>& levels, int n) {
    ClusterModel model;
    model.k = static_cast<int>(levels.size());
    model.n = n;
    for (const double level : levels) {
        Barycenter c;
        c.values.assign(static_cast<std::size_t>(n), level);
        model.centroids.push_back(std::move(c));
    }
    model.sizes.assign(levels.size(), 1);
    return model;
}

std::map<int, PredictorModel> naive_models(int k, int n, int m) {
    PredictorSpec spec;
    spec.kind = PredictorKind::seasonal_naive;
    spec.window = n;
    spec.horizon = m;
    spec.features.selected_channels = {"dl_volume"};
    std::map<int, PredictorModel> models;
    for (int c = 0; c < k; ++c) {
        models[c] = train(spec, {}, {}, {});
        models[c].cluster_id = c;
    }
    return models;
}

TimeSeries stream_of(std::vector<double> values) {
    TimeSeries s;
    s.cell_id = "cell_x";
    s.start_time = days_from_civil(2024, 1, 1) * 24;  // a Monday
    s.channel_names = {"dl_volume"};
    s.channels = {std::move(values)};
    return s;
}

NormStats identity_stats() {
    NormStats stats;
    stats.minmax["dl_volume"] = {0.0, 1.0};
    return stats;
}

StreamOptions identity_options(const NormStats& stats, int cadence = 1) {
    StreamOptions options;
    options.season.n = 24;
    options.season.m = 1;
    options.cadence = cadence;
    options.stats = &stats;
    return options;
}

}  // namespace

TEST_CASE("a steady stream sticks to the nearest centroid") {
    const auto cluster = constant_centroid_model({0.2, 0.8}, 24);
    const auto models = naive_models(2, 24, 1);
    const auto stats = identity_stats();
    const auto trace =
        run_stream(cluster, models, stream_of(std::vector<double>(72, 0.3)),
                   identity_options(stats));

    REQUIRE(trace.steps.size() == 72 - 24);
    CHECK(trace.steps.front().step == 24);
    CHECK(trace.steps.back().step == 71);
    for (const auto& rec : trace.steps) {
        REQUIRE(rec.scores.size() == 2);
        CHECK(rec.chosen == 0);
        CHECK(rec.scores[0] < rec.scores[1]);
        CHECK(rec.reevaluated);  // cadence 1
        CHECK(!rec.fallback);
        CHECK(!rec.ood);
        // seasonal naive on a constant stream is exact
        CHECK(rec.prediction == 0.3);
        CHECK(rec.truth == 0.3);
    }
    CHECK(trace.ood_buffer.empty());
}

TEST_CASE("a long cadence freezes scores between reevaluations") {
    const auto cluster = constant_centroid_model({0.2, 0.8}, 24);
    const auto models = naive_models(2, 24, 1);
    const auto stats = identity_stats();
    const auto trace =
        run_stream(cluster, models, stream_of(std::vector<double>(72, 0.3)),
                   identity_options(stats, 1000));

    REQUIRE(!trace.steps.empty());
    CHECK(trace.steps.front().reevaluated);
    for (std::size_t i = 1; i < trace.steps.size(); ++i) {
        CHECK(!trace.steps[i].reevaluated);
        CHECK(trace.steps[i].scores == trace.steps.front().scores);
        CHECK(trace.steps[i].chosen == trace.steps.front().chosen);
    }
}

TEST_CASE("score ties resolve to the lowest cluster index") {
    const auto cluster = constant_centroid_model({0.5, 0.5}, 24);
    const auto models = naive_models(2, 24, 1);
    const auto stats = identity_stats();
    const auto trace =
        run_stream(cluster, models, stream_of(std::vector<double>(50, 0.9)),
                   identity_options(stats));
    for (const auto& rec : trace.steps) {
        CHECK(rec.scores[0] == rec.scores[1]);
        CHECK(rec.chosen == 0);
    }
}

TEST_CASE("a regime switch moves the assignment within one window length") {
    std::vector<double> values(96, 0.2);
    std::fill(values.begin() + 48, values.end(), 0.8);
    const auto cluster = constant_centroid_model({0.2, 0.8}, 24);
    const auto models = naive_models(2, 24, 1);
    const auto stats = identity_stats();
    const auto trace =
        run_stream(cluster, models, stream_of(values), identity_options(stats));

    int first_flip = -1;
    for (const auto& rec : trace.steps) {
        if (rec.step < 48) CHECK(rec.chosen == 0);
        if (rec.chosen == 1 && first_flip < 0) first_flip = rec.step;
    }
    REQUIRE(first_flip >= 48);
    CHECK(first_flip < 48 + 24);
    for (const auto& rec : trace.steps)
        if (rec.step >= first_flip) CHECK(rec.chosen == 1);
}

TEST_CASE("target-day assignment reads the whole calendar day") {
    std::vector<double> values(48, 0.2);
    std::fill(values.begin() + 24, values.end(), 0.8);
    const auto cluster = constant_centroid_model({0.2, 0.8}, 24);
    const auto models = naive_models(2, 24, 1);
    const auto stats = identity_stats();

    auto options = identity_options(stats);
    const auto trailing = run_stream(cluster, models, stream_of(values), options);
    options.mode = AssignMode::target_day;
    const auto target_day = run_stream(cluster, models, stream_of(values), options);

    // at the first predicted step the trailing window is still all 0.2, but
    // the calendar day containing the step is all 0.8
    CHECK(trailing.steps.front().chosen == 0);
    CHECK(target_day.steps.front().chosen == 1);
}

TEST_CASE("nothing after the current step influences its record") {
    Rng rng(42);
    std::vector<double> values(100);
    for (auto& v : values) v = rng.uniform(1.0, 3.0);
    auto perturbed = values;
    for (std::size_t t = 70; t < perturbed.size(); ++t) perturbed[t] = 9.9;

    const auto cluster = constant_centroid_model({0.3, 0.7}, 24);
    const auto models = naive_models(2, 24, 1);
    StreamOptions options;  // no stats: the running envelope is in play too
    options.season.n = 24;
    options.season.m = 1;
    options.cadence = 3;

    const auto a = run_stream(cluster, models, stream_of(values), options);
    const auto b = run_stream(cluster, models, stream_of(perturbed), options);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        if (a.steps[i].step >= 70) continue;
        CHECK(a.steps[i].scores == b.steps[i].scores);
        CHECK(a.steps[i].chosen == b.steps[i].chosen);
        CHECK(a.steps[i].prediction == b.steps[i].prediction);
        CHECK(a.steps[i].truth == b.steps[i].truth);
        CHECK(a.steps[i].reevaluated == b.steps[i].reevaluated);
        CHECK(a.steps[i].fallback == b.steps[i].fallback);
    }
}

TEST_CASE("an unseen cell warms up on the naive rule with a running envelope") {
    Rng rng(7);
    std::vector<double> values(96);
    for (auto& v : values) v = rng.uniform(1.0, 3.0);

    const auto cluster = constant_centroid_model({0.5}, 24);
    const auto models = naive_models(1, 24, 1);
    StreamOptions options;
    options.season.n = 24;
    options.season.m = 1;
    OodPolicy policy;
    policy.threshold = 1e-9;  // everything would be flagged if armed
    options.ood = policy;

    const auto trace = run_stream(cluster, models, stream_of(values), options);
    REQUIRE(trace.steps.size() == 96 - 24);

    // replicate the causal envelope: absorb t only after step t is served
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    std::size_t absorbed = 0;
    for (const auto& rec : trace.steps) {
        const auto t = static_cast<std::size_t>(rec.step);
        while (absorbed < t) {
            lo = std::min(lo, values[absorbed]);
            hi = std::max(hi, values[absorbed]);
            ++absorbed;
        }
        if (t < 48) {
            CHECK(rec.fallback);
            CHECK(!rec.ood);  // deferred while the envelope is young
            const double expected = hi > lo ? (values[t - 24] - lo) / (hi - lo) : 0.0;
            CHECK(rec.prediction == expected);
        } else {
            CHECK(!rec.fallback);
            CHECK(rec.ood);
        }
        const double truth = hi > lo ? (values[t] - lo) / (hi - lo) : 0.0;
        CHECK(rec.truth == truth);
    }
}

TEST_CASE("flagged windows are buffered without overlap") {
    const auto cluster = constant_centroid_model({0.2}, 24);
    const auto models = naive_models(1, 24, 1);
    const auto stats = identity_stats();
    auto options = identity_options(stats);
    OodPolicy policy;
    policy.threshold = 0.01;
    options.ood = policy;

    const auto trace = run_stream(cluster, models, stream_of(std::vector<double>(120, 0.9)),
                                  options);
    for (const auto& rec : trace.steps) CHECK(rec.ood);

    // reevaluations happen every step but whole windows are buffered at most
    // once per season
    REQUIRE(trace.ood_buffer.size() == 4);
    for (std::size_t i = 0; i < trace.ood_buffer.size(); ++i) {
        const auto& seg = trace.ood_buffer[i];
        CHECK(seg.day_index == static_cast<int>(i));
        CHECK(seg.source_cell == "cell_x");
        REQUIRE(seg.values.size() == 24);
        for (const double v : seg.values) CHECK(v == 0.9);
    }
}

TEST_CASE("evaluation splits error by cluster and sets aside warm-up steps") {
    AssignmentTrace trace;
    trace.n = 4;
    auto add = [&trace](int chosen, double err, bool fallback, bool ood) {
        StepRecord rec;
        rec.step = static_cast<int>(trace.steps.size());
        rec.scores = {0.0, 0.0, 0.0};
        rec.chosen = chosen;
        rec.prediction = 1.0 + err;
        rec.truth = 1.0;
        rec.fallback = fallback;
        rec.ood = ood;
        trace.steps.push_back(rec);
    };
    add(0, 0.1, false, false);
    add(0, 0.3, false, true);
    add(1, 0.2, false, false);
    add(1, 0.2, false, false);
    add(0, 0.5, true, false);
    add(0, 0.7, true, false);

    const auto report = evaluate(trace);
    REQUIRE(report.cluster_mae.size() == 3);
    CHECK(report.cluster_mae[0] == doctest::Approx(0.2));
    CHECK(report.cluster_mae[1] == doctest::Approx(0.2));
    CHECK(std::isnan(report.cluster_mae[2]));
    CHECK(report.cluster_counts == std::vector<int>{2, 2, 0});
    CHECK(report.weighted_mae == doctest::Approx(0.2));
    CHECK(report.overall_mae == doctest::Approx(report.weighted_mae));
    CHECK(report.fallback_mae == doctest::Approx(0.6));
    CHECK(report.fallback_count == 2);
    CHECK(report.ood_count == 1);

    SUBCASE("a fallback-only trace has no cluster error") {
        AssignmentTrace warmup;
        StepRecord rec;
        rec.scores = {0.0};
        rec.fallback = true;
        rec.prediction = 0.4;
        rec.truth = 0.1;
        warmup.steps = {rec};
        const auto r = evaluate(warmup);
        CHECK(std::isnan(r.weighted_mae));
        CHECK(std::isnan(r.overall_mae));
        CHECK(r.fallback_mae == doctest::Approx(0.3));
    }
    SUBCASE("no warm-up steps leaves the fallback error undefined") {
        CHECK(report.fallback_count == 2);
        AssignmentTrace served;
        StepRecord rec;
        rec.scores = {0.0};
        served.steps = {rec};
        CHECK(std::isnan(evaluate(served).fallback_mae));
    }
    SUBCASE("an empty trace is an error") {
        CHECK_THROWS_AS(evaluate(AssignmentTrace{}), std::invalid_argument);
    }
}

TEST_CASE("weighted and flat error agree on a real trace") {
    std::vector<double> values(96, 0.2);
    std::fill(values.begin() + 48, values.end(), 0.8);
    const auto cluster = constant_centroid_model({0.2, 0.8}, 24);
    const auto models = naive_models(2, 24, 1);
    const auto stats = identity_stats();
    const auto trace =
        run_stream(cluster, models, stream_of(values), identity_options(stats));
    const auto report = evaluate(trace);
    CHECK(report.weighted_mae == doctest::Approx(report.overall_mae).epsilon(1e-12));
    CHECK(report.cluster_counts[0] + report.cluster_counts[1] ==
          static_cast<int>(trace.steps.size()));
}

TEST_CASE("the distance threshold is the nearest-rank quantile of training distances") {
    const auto model = constant_centroid_model({0.5}, 4);
    SegmentSet segments;
    for (int i = 0; i < 100; ++i) {
        Segment seg;
        seg.values.assign(4, 0.5 + 0.001 * (i + 1));
        segments.push_back(std::move(seg));
    }
    // distance of segment i is 0.002 * (i+1): sqrt(4 * offset^2)
    const auto policy = derive_ood_policy(model, segments, 0.99, 5);
    CHECK(policy.threshold == doctest::Approx(0.002 * 99).epsilon(1e-9));
    CHECK(policy.buffer_min_segments == 5);
    CHECK(policy.quantile_source == "train_self_distance_p99");

    CHECK(derive_ood_policy(model, segments, 1.0).threshold ==
          doctest::Approx(0.002 * 100).epsilon(1e-9));
    CHECK(derive_ood_policy(model, segments, 0.005).threshold ==
          doctest::Approx(0.002).epsilon(1e-9));

    CHECK_THROWS_AS(derive_ood_policy(model, {}, 0.99), std::invalid_argument);
    CHECK_THROWS_AS(derive_ood_policy(model, segments, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(derive_ood_policy(model, segments, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(derive_ood_policy(model, segments, 0.99, 0), std::invalid_argument);
}

TEST_CASE("reclustering grows a new centroid from the buffer") {
    SegmentSet original;
    for (int i = 0; i < 10; ++i) {
        Segment lo, hi;
        lo.values.assign(6, 0.1);
        hi.values.assign(6, 0.9);
        original.push_back(lo);
        original.push_back(hi);
    }
    const auto old_model = constant_centroid_model({0.1, 0.9}, 6);

    SegmentSet buffer;
    for (int i = 0; i < 5; ++i) {
        Segment seg;
        seg.values.assign(6, 0.5);
        buffer.push_back(std::move(seg));
    }

    const auto result = ood_recluster(original, buffer, old_model, {}, 3);
    CHECK(!result.degenerate);
    CHECK(result.model.k == 3);
    REQUIRE(result.buffer_centroid.size() == 6);
    for (const double v : result.buffer_centroid) CHECK(v == doctest::Approx(0.5));
    CHECK(result.seed_to_nearest_old ==
          doctest::Approx(std::sqrt(6 * 0.4 * 0.4)).epsilon(1e-9));

    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& c : result.model.centroids)
        nearest = std::min(nearest,
                           dtw_distance(c.values, std::vector<double>(6, 0.5), {}));
    CHECK(nearest < 0.05);

    SUBCASE("a buffer near an old centroid is degenerate") {
        SegmentSet near_old;
        for (int i = 0; i < 5; ++i) {
            Segment seg;
            seg.values.assign(6, 0.12);
            near_old.push_back(std::move(seg));
        }
        const auto d = ood_recluster(original, near_old, old_model, {}, 3);
        CHECK(d.degenerate);
        CHECK(d.model.k == 3);  // still refit; the caller decides what to keep
    }
    SUBCASE("a single-cluster model is degenerate only on an exact collapse") {
        const auto single = constant_centroid_model({0.5}, 6);
        const auto d = ood_recluster(original, buffer, single, {}, 3);
        CHECK(d.degenerate);  // dba of identical 0.5 members equals the centroid
    }
    SUBCASE("buffer floor is enforced") {
        SegmentSet two(buffer.begin(), buffer.begin() + 2);
        CHECK_THROWS_AS(ood_recluster(original, two, old_model, {}, 3),
                        std::invalid_argument);
        CHECK_THROWS_AS(ood_recluster(original, {}, old_model, {}, 1),
                        std::invalid_argument);
    }
}

TEST_CASE("the trace file lists scores, choice, and flags per step") {
    const auto cluster = constant_centroid_model({0.2, 0.8}, 24);
    const auto models = naive_models(2, 24, 1);
    const auto stats = identity_stats();
    const auto trace =
        run_stream(cluster, models, stream_of(std::vector<double>(30, 0.3)),
                   identity_options(stats));

    const std::string path = "trace_test_tmp.csv";
    write_trace_csv(trace, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,score_0,score_1,chosen,prediction,truth,reevaluated,fallback,ood");
    std::size_t rows = 0;
    std::string line;
    std::string first_row;
    while (std::getline(in, line))
        if (!line.empty()) {
            if (rows == 0) first_row = line;
            ++rows;
        }
    in.close();
    std::remove(path.c_str());
    CHECK(rows == trace.steps.size());
    CHECK(first_row.rfind("24,", 0) == 0);

    CHECK_THROWS_AS(write_trace_csv(AssignmentTrace{}, path), std::invalid_argument);
}

TEST_CASE("the evaluation report serializes every metric") {
    AssignmentTrace trace;
    StepRecord rec;
    rec.scores = {0.1, 0.2};
    rec.prediction = 0.4;
    rec.truth = 0.5;
    trace.steps = {rec};
    const auto parsed = nlohmann::json::parse(evaluation_report_to_json(evaluate(trace)));
    for (const char* key : {"weighted_mae", "overall_mae", "cluster_mae", "cluster_counts",
                            "fallback_mae", "fallback_count", "ood_count"})
        CHECK(parsed.contains(key));
    CHECK(parsed["overall_mae"].get<double>() == doctest::Approx(0.1));
    CHECK(parsed["fallback_mae"].is_null());  // NaN has no JSON number
}

TEST_CASE("stream validation catches mismatched setups") {
    const auto cluster = constant_centroid_model({0.5}, 24);
    const auto models = naive_models(1, 24, 1);
    const auto stats = identity_stats();
    const auto stream = stream_of(std::vector<double>(60, 0.4));

    SUBCASE("wrong season length") {
        auto options = identity_options(stats);
        options.season.n = 12;
        CHECK_THROWS_AS(run_stream(cluster, naive_models(1, 12, 1), stream, options),
                        std::invalid_argument);
    }
    SUBCASE("no models") {
        CHECK_THROWS_AS(run_stream(cluster, {}, stream, identity_options(stats)),
                        std::invalid_argument);
    }
    SUBCASE("model window disagrees with the stream season") {
        CHECK_THROWS_AS(run_stream(cluster, naive_models(1, 12, 1), stream,
                                    identity_options(stats)),
                        std::invalid_argument);
    }
    SUBCASE("stream shorter than one window") {
        CHECK_THROWS_AS(run_stream(cluster, models,
                                    stream_of(std::vector<double>(24, 0.4)),
                                    identity_options(stats)),
                        std::invalid_argument);
    }
    SUBCASE("training stats must cover every input channel") {
        NormStats empty_stats;
        auto options = identity_options(empty_stats);
        CHECK_THROWS_AS(run_stream(cluster, models, stream, options),
                        std::invalid_argument);
    }
    SUBCASE("cadence must be positive") {
        auto options = identity_options(stats, 0);
        CHECK_THROWS_AS(run_stream(cluster, models, stream, options),
                        std::invalid_argument);
    }
}
