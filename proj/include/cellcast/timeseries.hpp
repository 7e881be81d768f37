#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace cellcast {

// ---- calendar helpers (hourly resolution, UTC) ----

std::int64_t days_from_civil(int year, int month, int day);
// Accepts "YYYY-MM-DDTHH:MM[:SS]" (or a space separator); minutes and seconds
// must be zero. Returns hours since the Unix epoch.
std::int64_t parse_iso_hour(const std::string& text);
std::string format_iso_hour(std::int64_t hour);
int hour_of_day(std::int64_t hour);   // 0..23
int day_of_week(std::int64_t hour);   // 0 = Monday .. 6 = Sunday
bool is_weekend(std::int64_t hour);

// ---- domain types ----

// One cell's hourly multivariate record. All channels have equal length and
// timestamps advance by exactly one hour from start_time.
struct TimeSeries {
    std::string cell_id;
    std::int64_t start_time = 0;  // absolute hour index (hours since epoch)
    std::vector<std::string> channel_names;
    std::vector<std::vector<double>> channels;
    std::string output_channel = "dl_volume";

    std::size_t length() const {
        return channels.empty() ? 0 : channels.front().size();
    }
    int channel_index(const std::string& name) const;
    const std::vector<double>& channel(const std::string& name) const;
    const std::vector<double>& output() const { return channel(output_channel); }
    bool has_channel(const std::string& name) const {
        return channel_index(name) >= 0;
    }
};

// One seasonal cycle of a cell's output channel.
struct Segment {
    std::string source_cell;
    int day_index = 0;
    std::vector<double> values;
};

using SegmentSet = std::vector<Segment>;

struct SeasonalityConfig {
    int n = 24;  // seasonal period in steps
    int m = 1;   // forecast horizon in steps
    bool align_midnight = false;  // snap segment boundaries to hour-of-day 0
};

enum class FeatureVariant { uni, ran, peak, handover, all };

std::string to_string(FeatureVariant v);
FeatureVariant feature_variant_from_string(const std::string& s);

// Resolved model input description: raw channels by name (output first) plus
// which engineered binary flags are appended after them.
struct FeatureConfig {
    FeatureVariant variant = FeatureVariant::uni;
    std::vector<std::string> selected_channels;
    bool peak_flag = false;
    bool weekend_flag = false;

    int feature_count() const {
        return static_cast<int>(selected_channels.size()) + (peak_flag ? 1 : 0) +
               (weekend_flag ? 1 : 0);
    }
};

// Per-channel min/max used for min-max scaling. Channels with min == max are
// mapped to all-zeros and recorded in constant_channels.
struct NormStats {
    std::map<std::string, std::pair<double, double>> minmax;
    std::set<std::string> constant_channels;
};

// names of the engineered channels/features
inline constexpr const char* kPeakChannel = "peak_hour";
inline constexpr const char* kWeekendChannel = "weekend";
inline constexpr const char* kHandoverInChannel = "handover_in";
inline constexpr const char* kHandoverOutChannel = "handover_out";

// ---- operations ----

struct IngestOptions {
    std::vector<std::string> schema;  // channels to load; empty = all in header
    int max_impute_gap = 2;  // gaps of up to this many missing hours are
                             // linearly interpolated; longer gaps split the
                             // series; 0 disables imputation
    std::string output_channel = "dl_volume";
};

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t rows_imputed = 0;
    std::size_t rows_dropped = 0;
    std::vector<std::string> warnings;
};

// Reads `cell_id,timestamp,<channel>...` CSV into one TimeSeries per cell
// (more when long gaps split a cell). Rows are sorted by timestamp. Throws on
// malformed rows (naming the line), sub-hourly timestamps, and duplicate
// (cell_id, timestamp) pairs.
std::vector<TimeSeries> ingest_csv(const std::string& path,
                                   const IngestOptions& options = {},
                                   IngestReport* report = nullptr);

// Min-max scaling per channel. With supplied stats the mapping uses them,
// otherwise stats are computed from this series; the returned stats reproduce
// the mapping either way.
std::pair<TimeSeries, NormStats> normalize(const TimeSeries& series,
                                           const NormStats* stats = nullptr);

struct SegmentizeResult {
    std::vector<Segment> segments;
    std::size_t remainder = 0;         // trailing values shorter than n
    std::size_t skipped_leading = 0;   // dropped by midnight alignment
};

// Non-overlapping consecutive windows of length n over the output channel.
SegmentizeResult segmentize(const TimeSeries& series, const SeasonalityConfig& config);

// Flattens per-cell segment lists, preserving provenance. Throws on mixed
// segment lengths.
SegmentSet consolidate(const std::vector<std::vector<Segment>>& per_cell_segments);

struct PearsonResult {
    std::vector<std::string> channels;  // output first, then by descending r
    std::map<std::string, double> correlations;
    std::vector<std::string> warnings;
};

// Channels whose Pearson correlation with the output channel over all series'
// pooled samples exceeds `threshold`. Zero-variance channels are treated as
// correlation 0 and excluded with a warning.
PearsonResult pearson_select(const std::vector<TimeSeries>& series_set,
                             double threshold);

// Resolves a feature variant against the training series. The ran variant is
// capped/padded to `ran_channels` total channels by top correlation;
// `handover_in`/`handover_out` name the raw handover source channels, which
// are excluded from ran candidates so the `all` union stays duplicate-free.
FeatureConfig resolve_feature_config(FeatureVariant variant,
                                     const std::vector<TimeSeries>& series_set,
                                     double threshold = 0.9, int ran_channels = 5,
                                     const std::string& handover_in = "ho_in",
                                     const std::string& handover_out = "ho_out");

// Appends the peak-hour and weekend binary channels. The peak flag is 1 for
// hours-of-day whose mean output volume over this series is >= the overall
// mean; the weekend flag is 1 on Saturdays and Sundays.
TimeSeries engineer_peak_features(const TimeSeries& series);

// Normalizes the two handover channels and appends them as handover_in /
// handover_out. Throws naming the channel when one is absent.
TimeSeries attach_handover_features(const TimeSeries& series,
                                    const std::string& incoming,
                                    const std::string& outgoing);

// JSON persistence for normalization stats: {channel: {min, max}}.
std::string norm_stats_to_json(const NormStats& stats);
NormStats norm_stats_from_json(const std::string& text);

}  // namespace cellcast
