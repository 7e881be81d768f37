#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "cellcast/evaluation.hpp"
#include "cellcast/rng.hpp"
#include "cellcast/synth.hpp"

using namespace cellcast;

namespace {

SyntheticData four_cells(int weeks = 2, double sigma = 0.05) {
    SyntheticSpec spec;
    spec.profiles = default_profiles();
    spec.cells = 4;
    spec.weeks = weeks;
    spec.noise_sigma = sigma;
    spec.seed = 91;
    return generate(spec);
}

ProtocolOptions naive_options(int k) {
    ProtocolOptions options;
    options.k = k;
    options.predictor.kind = PredictorKind::seasonal_naive;
    options.variant = FeatureVariant::uni;
    options.seed = 5;
    return options;
}

}  // namespace

TEST_CASE("agreement score is exact on hand-checked partitions") {
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 1}) == doctest::Approx(1.0));
    // relabeling does not matter
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {7, 7, 3, 3}) == doctest::Approx(1.0));
    // splitting one cluster: contingency arithmetic gives 4/7
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 2}) ==
          doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    // one trivial partition against a real split is chance level
    CHECK(adjusted_rand_index({0, 0, 0, 0}, {0, 0, 1, 1}) == doctest::Approx(0.0));
}

TEST_CASE("agreement with random labels hovers near zero") {
    Rng rng(1234);
    std::vector<int> truth(500), noise(500);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        truth[i] = static_cast<int>(i % 5);
        noise[i] = static_cast<int>(rng.next_index(5));
    }
    CHECK(std::abs(adjusted_rand_index(truth, noise)) < 0.2);
}

TEST_CASE("degenerate partitions score as identical") {
    CHECK(adjusted_rand_index({3}, {9}) == 1.0);
    CHECK(adjusted_rand_index({1, 1, 1}, {2, 2, 2}) == 1.0);
    CHECK(adjusted_rand_index({0, 1, 2}, {2, 0, 1}) == 1.0);  // all singletons
}

TEST_CASE("agreement input must be two labelings of the same items") {
    CHECK_THROWS_AS(adjusted_rand_index({0, 1}, {0}), std::invalid_argument);
    CHECK_THROWS_AS(adjusted_rand_index({}, {}), std::invalid_argument);
}

TEST_CASE("preprocessing attaches engineered channels and scales everything") {
    const auto data = four_cells(1);
    const auto processed = preprocess_cells(data.cells);
    REQUIRE(processed.size() == data.cells.size());
    for (const auto& cell : processed) {
        CHECK(cell.has_channel(kHandoverInChannel));
        CHECK(cell.has_channel(kHandoverOutChannel));
        CHECK(cell.has_channel(kPeakChannel));
        CHECK(cell.has_channel(kWeekendChannel));
        for (const auto& ch : cell.channels)
            for (const double v : ch) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
    }

    SUBCASE("cells without handover sources are left plain") {
        TimeSeries bare;
        bare.cell_id = "bare";
        bare.start_time = data.cells[0].start_time;
        bare.channel_names = {"dl_volume"};
        bare.channels = {std::vector<double>(48, 0.4)};
        bare.channels[0][10] = 1.5;
        const auto out = preprocess_cells({bare});
        CHECK(!out[0].has_channel(kHandoverInChannel));
        CHECK(out[0].has_channel(kPeakChannel));
        CHECK(out[0].channels.size() == 3);
    }
}

TEST_CASE("the held-out protocol trains on everything except the stream") {
    const auto data = four_cells();
    const auto [train, holdout] = holdout_split(data.cells, "cell_003");

    const auto result = run_protocol(train, holdout, naive_options(2));

    CHECK(result.cluster.k == 2);
    CHECK(result.models.size() == 2);
    CHECK(result.training_segments.size() == 3 * 14);
    for (const auto& seg : result.training_segments)
        CHECK(seg.source_cell != "cell_003");

    CHECK(result.feature_config.variant == FeatureVariant::uni);
    CHECK(result.feature_config.selected_channels ==
          std::vector<std::string>{"dl_volume"});
    CHECK(!result.feature_config.peak_flag);

    // the stream is served as unseen: one season of seasonal-naive warm-up
    CHECK(result.trace.steps.size() == 14 * 24 - 24);  // two weeks of hours, minus warm-up window
    CHECK(result.report.fallback_count == 24);
    CHECK(std::isfinite(result.report.weighted_mae));
    CHECK(std::isfinite(result.report.overall_mae));
    CHECK(!result.ood_policy.has_value());

    SUBCASE("the held-out id must not appear among the training cells") {
        CHECK_THROWS_AS(run_protocol(data.cells, holdout, naive_options(2)),
                        std::invalid_argument);
    }
    SUBCASE("an out-of-distribution policy is derived on request") {
        auto options = naive_options(2);
        options.with_ood = true;
        options.ood_quantile = 0.95;
        const auto guarded = run_protocol(train, holdout, options);
        REQUIRE(guarded.ood_policy.has_value());
        CHECK(guarded.ood_policy->threshold > 0.0);
        CHECK(guarded.report.ood_count >= 0);
    }
}

TEST_CASE("the single-cell baseline trains and scores on the same cell") {
    const auto data = four_cells();
    const auto& cell = data.cells[0];
    const auto result = baseline_single_cell(cell, cell, 0.04, naive_options(4));
    // seasonal naive on a periodic low-noise cell is accurate but not perfect
    CHECK(result.baseline_mae > 0.0);
    CHECK(result.baseline_mae < 0.2);
    CHECK(result.framework_mae == 0.04);
    CHECK(result.ratio == doctest::Approx(0.04 / result.baseline_mae));
}

TEST_CASE("a noiseless periodic cell makes the naive baseline exact") {
    const auto data = four_cells(2, 0.0);
    const auto& cell = data.cells[1];
    const auto result = baseline_single_cell(cell, cell, 0.5, naive_options(4));
    CHECK(result.baseline_mae == 0.0);
    CHECK(std::isinf(result.ratio));
}

TEST_CASE("the sweep emits one row per metric, config, and cluster count") {
    const auto data = four_cells(1);
    const auto [train, holdout] = holdout_split(data.cells, "cell_003");

    const auto rows = sweep_k(train, holdout, {1, 2}, {FeatureVariant::uni},
                              naive_options(1));
    REQUIRE(rows.size() == 2 * 3 + 2);

    auto count_metric = [&rows](const std::string& metric) {
        return std::count_if(rows.begin(), rows.end(), [&metric](const SweepRow& r) {
            return r.metric == metric;
        });
    };
    CHECK(count_metric("weighted_mae") == 2);
    CHECK(count_metric("overall_mae") == 2);
    CHECK(count_metric("fallback_mae") == 2);
    CHECK(count_metric("baseline_single_cell_mae") == 1);
    CHECK(count_metric("baseline_ratio") == 1);
    for (const auto& row : rows) {
        CHECK(row.config == "uni");
        CHECK((row.k == 1 || row.k == 2));
    }
    const auto baseline_row =
        std::find_if(rows.begin(), rows.end(), [](const SweepRow& r) {
            return r.metric == "baseline_single_cell_mae";
        });
    CHECK(baseline_row->k == 2);  // reported against the largest k

    SUBCASE("rows write as a long-format table") {
        const std::string path = "sweep_tmp.csv";
        auto with_nan = rows;
        with_nan.push_back({9, "uni", "made_up", std::numeric_limits<double>::quiet_NaN()});
        write_sweep_csv(with_nan, path);
        std::ifstream in(path);
        REQUIRE(in.good());
        std::string header;
        std::getline(in, header);
        CHECK(header == "k,config,metric,value");
        std::size_t count = 0;
        std::string line, last;
        while (std::getline(in, line))
            if (!line.empty()) {
                ++count;
                last = line;
            }
        in.close();
        std::remove(path.c_str());
        CHECK(count == with_nan.size());
        CHECK(last == "9,uni,made_up,nan");
    }
    SUBCASE("rows serialize to JSON") {
        const auto parsed = nlohmann::json::parse(sweep_to_json(rows));
        REQUIRE(parsed.is_array());
        REQUIRE(parsed.size() == rows.size());
        CHECK(parsed[0].contains("k"));
        CHECK(parsed[0].contains("config"));
        CHECK(parsed[0].contains("metric"));
        CHECK(parsed[0].contains("value"));
    }
    SUBCASE("empty sweep requests are rejected") {
        CHECK_THROWS_AS(sweep_k(train, holdout, {}, {FeatureVariant::uni}, naive_options(1)),
                        std::invalid_argument);
        CHECK_THROWS_AS(sweep_k(train, holdout, {1}, {}, naive_options(1)),
                        std::invalid_argument);
    }
}
