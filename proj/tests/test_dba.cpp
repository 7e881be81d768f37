#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <limits>
#include <vector>

#include "cellcast/dba.hpp"
#include "cellcast/dtw.hpp"
#include "cellcast/rng.hpp"

using cellcast::Barycenter;
using cellcast::dba_average;
using cellcast::dba_inertia;
using cellcast::dtw_distance;
using cellcast::Rng;

namespace {

std::vector<std::vector<double>> random_members(Rng& rng, std::size_t count,
                                                std::size_t len) {
    std::vector<std::vector<double>> members(count, std::vector<double>(len));
    for (auto& member : members)
        for (auto& v : member) v = rng.uniform(0.0, 1.0);
    return members;
}

// independent medoid: the member with the smallest total DTW distance to the
// others, lowest index winning ties
std::size_t medoid_index(const std::vector<std::vector<double>>& members) {
    std::size_t best = 0;
    double best_total = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < members.size(); ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < members.size(); ++j)
            if (i != j) total += dtw_distance(members[i], members[j]);
        if (total < best_total) {
            best_total = total;
            best = i;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("averages two opposite constants to their midpoint") {
    const std::vector<std::vector<double>> members{{0.0, 0.0, 0.0}, {2.0, 2.0, 2.0}};
    const auto result = dba_average(members);
    REQUIRE(result.values.size() == 3);
    for (const double v : result.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    // each member sits at DTW distance sqrt(3) from [1,1,1]
    CHECK(result.inertia == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("inertia is the sum of squared distances") {
    const std::vector<std::vector<double>> members{{0.0, 1.0, 2.0}};
    const std::vector<double> center{0.0, 2.0};
    CHECK(dba_inertia(members, center) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("refinement never increases inertia") {
    Rng rng(2024);
    for (int trial = 0; trial < 12; ++trial) {
        const auto members = random_members(rng, 5 + rng.next_index(16), 24);
        const auto result = dba_average(members);
        REQUIRE(!result.inertia_history.empty());
        for (std::size_t i = 1; i < result.inertia_history.size(); ++i)
            CHECK(result.inertia_history[i] <= result.inertia_history[i - 1] + 1e-9);
        CHECK(result.inertia == doctest::Approx(result.inertia_history.back()));
        CHECK(result.inertia ==
              doctest::Approx(dba_inertia(members, result.values)).epsilon(1e-9));
    }
}

TEST_CASE("final inertia beats the medoid it starts from") {
    Rng rng(515);
    for (int trial = 0; trial < 8; ++trial) {
        const auto members = random_members(rng, 6 + rng.next_index(10), 24);
        const auto medoid = members[medoid_index(members)];
        const double medoid_inertia = dba_inertia(members, medoid);
        const auto result = dba_average(members);
        CHECK(result.inertia <= medoid_inertia + 1e-9);
    }
}

TEST_CASE("identical members converge in a single pass") {
    const std::vector<double> shape{0.1, 0.4, 0.9, 0.4, 0.1};
    const std::vector<std::vector<double>> members{shape, shape, shape};
    const auto result = dba_average(members);
    CHECK(result.iterations_used == 1);
    REQUIRE(result.values.size() == shape.size());
    for (std::size_t i = 0; i < shape.size(); ++i)  // mean of identical values
        CHECK(result.values[i] == doctest::Approx(shape[i]).epsilon(1e-15));
    CHECK(result.inertia == doctest::Approx(0.0));
}

TEST_CASE("is invariant to member order") {
    Rng rng(88);
    auto members = random_members(rng, 9, 24);
    const auto forward = dba_average(members);
    std::reverse(members.begin(), members.end());
    const auto reversed = dba_average(members);
    REQUIRE(forward.values.size() == reversed.values.size());
    for (std::size_t i = 0; i < forward.values.size(); ++i)
        CHECK(forward.values[i] == doctest::Approx(reversed.values[i]).epsilon(1e-12));
    CHECK(forward.inertia == doctest::Approx(reversed.inertia).epsilon(1e-12));
}

TEST_CASE("honors an explicit starting center") {
    Rng rng(3);
    const auto members = random_members(rng, 6, 12);
    std::vector<double> init(12, 0.5);
    const auto result = dba_average(members, init);
    // refinement from the supplied center must not exceed its inertia
    CHECK(result.inertia <= dba_inertia(members, init) + 1e-9);
    const auto from_medoid = dba_average(members);
    CHECK(from_medoid.inertia <= dba_inertia(members, members[medoid_index(members)]) + 1e-9);
}

TEST_CASE("a single member is its own barycenter") {
    const std::vector<std::vector<double>> members{{0.2, 0.7, 0.2, 0.9}};
    const auto result = dba_average(members);
    CHECK(result.values == members.front());
    CHECK(result.inertia == doctest::Approx(0.0));
}

TEST_CASE("rejects empty or ragged input") {
    CHECK_THROWS_AS(dba_average({}), std::invalid_argument);
    const std::vector<std::vector<double>> ragged{{1.0, 2.0}, {1.0, 2.0, 3.0}};
    CHECK_THROWS_AS(dba_average(ragged), std::invalid_argument);
}
