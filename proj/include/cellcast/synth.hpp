#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cellcast/timeseries.hpp"

namespace cellcast {

struct RegimeSwitch {
    int week = 0;     // takes effect at the start of this week (0-based)
    int profile = 0;  // profile index active from then on
};

struct DipSpec {
    int start_week = 0;
    int end_week = 0;  // inclusive
    double scale = 0.5;
};

struct SyntheticSpec {
    std::vector<std::vector<double>> profiles;  // length-24 shapes, values in [0,1]
    int cells = 20;
    int weeks = 12;
    double noise_sigma = 0.05;
    double weekend_scale = 1.0;  // multiplier on Saturday/Sunday
    std::map<int, std::vector<RegimeSwitch>> regime_switches;  // keyed by cell index
    std::optional<DipSpec> dip;  // demand collapse over a week range
    std::uint64_t seed = 0;
};

// Four distinct daily shapes: commuter double peak, night-active, single
// evening peak, broad midday plateau.
std::vector<std::vector<double>> default_profiles();

struct DayLabel {
    std::string cell_id;
    int day_index = 0;
    int profile = 0;
};

struct SyntheticData {
    std::vector<TimeSeries> cells;
    std::vector<DayLabel> labels;           // generating profile per cell-day
    double min_profile_separation = 0.0;    // min pairwise DTW between profiles
};

// Hourly traffic for `cells` cells over `weeks` weeks starting on a Monday
// midnight. Cell i draws its base shape from profile i mod P, modified by
// regime switches, weekend scaling, the optional dip, and Gaussian noise
// (clipped at zero). Besides the volume channel the series carries four
// tightly correlated channels, two lagged handover counts, and thirteen
// independent noise channels (20 in total). Deterministic given spec.seed,
// with per-cell derived seeds.
SyntheticData generate(const SyntheticSpec& spec);

// Splits off one cell as the held-out stream; the returned training set never
// contains it. Throws on an unknown cell id.
std::pair<std::vector<TimeSeries>, TimeSeries> holdout_split(
    const std::vector<TimeSeries>& dataset, const std::string& holdout_cell);

// cell_id,timestamp,<channel>... rows, cells in order, hours ascending.
void write_data_csv(const std::vector<TimeSeries>& cells, const std::string& path);

// cell_id,day_index,profile rows.
void write_labels_csv(const std::vector<DayLabel>& labels, const std::string& path);

std::vector<DayLabel> read_labels_csv(const std::string& path);

}  // namespace cellcast
