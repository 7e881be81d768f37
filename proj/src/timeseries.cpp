#include "cellcast/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cellcast {

// ---- calendar ----

std::int64_t days_from_civil(int y, int m, int d) {
    // Howard Hinnant's algorithm
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                         static_cast<unsigned>(d) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) -
           719468;
}

std::int64_t parse_iso_hour(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = 0;
    const int got = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep,
                                &h, &mi, &s);
    if (got < 6 || (sep != 'T' && sep != ' '))
        throw std::invalid_argument("bad timestamp: " + text);
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23)
        throw std::invalid_argument("bad timestamp: " + text);
    if (mi != 0 || s != 0)
        throw std::invalid_argument("sub-hourly timestamp: " + text);
    return days_from_civil(y, mo, d) * 24 + h;
}

std::string format_iso_hour(std::int64_t hour) {
    std::int64_t days = hour / 24;
    int h = static_cast<int>(hour % 24);
    if (h < 0) {
        h += 24;
        days -= 1;
    }
    // inverse of days_from_civil
    std::int64_t z = days + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02d:00:00",
                  static_cast<long long>(y + (m <= 2)), m, d, h);
    return buf;
}

int hour_of_day(std::int64_t hour) {
    const std::int64_t h = hour % 24;
    return static_cast<int>(h < 0 ? h + 24 : h);
}

int day_of_week(std::int64_t hour) {
    std::int64_t days = hour / 24;
    if (hour % 24 < 0) days -= 1;
    const std::int64_t dow = (days + 3) % 7;  // epoch day 0 was a Thursday
    return static_cast<int>(dow < 0 ? dow + 7 : dow);
}

bool is_weekend(std::int64_t hour) { return day_of_week(hour) >= 5; }

// ---- TimeSeries ----

int TimeSeries::channel_index(const std::string& name) const {
    for (std::size_t i = 0; i < channel_names.size(); ++i)
        if (channel_names[i] == name) return static_cast<int>(i);
    return -1;
}

const std::vector<double>& TimeSeries::channel(const std::string& name) const {
    const int idx = channel_index(name);
    if (idx < 0)
        throw std::invalid_argument("series " + cell_id + ": no channel " + name);
    return channels[static_cast<std::size_t>(idx)];
}

std::string to_string(FeatureVariant v) {
    switch (v) {
        case FeatureVariant::uni: return "uni";
        case FeatureVariant::ran: return "ran";
        case FeatureVariant::peak: return "peak";
        case FeatureVariant::handover: return "handover";
        case FeatureVariant::all: return "all";
    }
    return "uni";
}

FeatureVariant feature_variant_from_string(const std::string& s) {
    if (s == "uni") return FeatureVariant::uni;
    if (s == "ran") return FeatureVariant::ran;
    if (s == "peak") return FeatureVariant::peak;
    if (s == "handover") return FeatureVariant::handover;
    if (s == "all") return FeatureVariant::all;
    throw std::invalid_argument("unknown feature variant: " + s);
}

// ---- ingestion ----

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double_field(const std::string& s, std::size_t line_no) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("malformed row at line " + std::to_string(line_no) +
                                    ": bad number '" + s + "'");
    }
    if (pos != s.size())
        throw std::invalid_argument("malformed row at line " + std::to_string(line_no) +
                                    ": bad number '" + s + "'");
    if (!std::isfinite(v))
        throw std::invalid_argument("malformed row at line " + std::to_string(line_no) +
                                    ": non-finite value");
    return v;
}

struct RawRow {
    std::int64_t hour;
    std::vector<double> values;
    std::size_t line_no;
};

}  // namespace

std::vector<TimeSeries> ingest_csv(const std::string& path,
                                   const IngestOptions& options,
                                   IngestReport* report) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "cell_id" || header[1] != "timestamp")
        throw std::invalid_argument(path + ": header must be cell_id,timestamp,<channel>...");

    std::vector<std::string> all_channels(header.begin() + 2, header.end());
    std::vector<std::string> wanted =
        options.schema.empty() ? all_channels : options.schema;
    std::vector<int> column_of;  // wanted channel -> column in row
    for (const auto& name : wanted) {
        const auto it = std::find(all_channels.begin(), all_channels.end(), name);
        if (it == all_channels.end())
            throw std::invalid_argument(path + ": channel " + name + " not in header");
        column_of.push_back(static_cast<int>(it - all_channels.begin()));
    }

    std::map<std::string, std::vector<RawRow>> per_cell;
    IngestReport local;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) {
            ++local.rows_dropped;
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw std::invalid_argument("malformed row at line " + std::to_string(line_no) +
                                        ": expected " + std::to_string(header.size()) +
                                        " fields, got " + std::to_string(fields.size()));
        RawRow row;
        row.line_no = line_no;
        row.hour = parse_iso_hour(fields[1]);
        row.values.reserve(wanted.size());
        for (const int col : column_of)
            row.values.push_back(
                parse_double_field(fields[static_cast<std::size_t>(col) + 2], line_no));
        per_cell[fields[0]].push_back(std::move(row));
        ++local.rows_read;
    }

    std::vector<TimeSeries> result;
    for (auto& [cell, rows] : per_cell) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const RawRow& a, const RawRow& b) { return a.hour < b.hour; });
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].hour == rows[i - 1].hour)
                throw std::invalid_argument(
                    "duplicate (cell_id, timestamp) at line " +
                    std::to_string(rows[i].line_no) + ": " + cell + ", " +
                    format_iso_hour(rows[i].hour));
        }

        // walk rows, imputing short gaps and splitting on long ones
        TimeSeries current;
        auto start_series = [&](std::int64_t hour) {
            current = TimeSeries{};
            current.cell_id = cell;
            current.start_time = hour;
            current.output_channel = options.output_channel;
            current.channel_names = wanted;
            current.channels.assign(wanted.size(), {});
        };
        auto push_values = [&](const std::vector<double>& values) {
            for (std::size_t c = 0; c < values.size(); ++c)
                current.channels[c].push_back(values[c]);
        };
        auto flush = [&]() {
            if (current.length() > 0) result.push_back(std::move(current));
        };

        start_series(rows.front().hour);
        push_values(rows.front().values);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const std::int64_t gap = rows[i].hour - rows[i - 1].hour - 1;
            if (gap == 0) {
                push_values(rows[i].values);
            } else if (gap <= options.max_impute_gap) {
                for (std::int64_t g = 1; g <= gap; ++g) {
                    std::vector<double> filled(wanted.size());
                    const double t = static_cast<double>(g) / static_cast<double>(gap + 1);
                    for (std::size_t c = 0; c < wanted.size(); ++c)
                        filled[c] = rows[i - 1].values[c] +
                                    t * (rows[i].values[c] - rows[i - 1].values[c]);
                    push_values(filled);
                    ++local.rows_imputed;
                }
                push_values(rows[i].values);
            } else {
                local.warnings.push_back("cell " + cell + ": gap of " +
                                         std::to_string(gap) + " hours before " +
                                         format_iso_hour(rows[i].hour) +
                                         " splits the series");
                flush();
                start_series(rows[i].hour);
                push_values(rows[i].values);
            }
        }
        flush();
    }

    if (report) *report = std::move(local);
    return result;
}

// ---- normalization ----

std::pair<TimeSeries, NormStats> normalize(const TimeSeries& series,
                                           const NormStats* stats) {
    if (series.length() == 0)
        throw std::invalid_argument("normalize: empty series " + series.cell_id);

    TimeSeries out = series;
    NormStats used;
    for (std::size_t c = 0; c < series.channel_names.size(); ++c) {
        const auto& name = series.channel_names[c];
        double lo, hi;
        if (stats) {
            const auto it = stats->minmax.find(name);
            if (it == stats->minmax.end())
                throw std::invalid_argument("normalize: no stats for channel " + name);
            lo = it->second.first;
            hi = it->second.second;
        } else {
            lo = *std::min_element(series.channels[c].begin(), series.channels[c].end());
            hi = *std::max_element(series.channels[c].begin(), series.channels[c].end());
        }
        used.minmax[name] = {lo, hi};
        if (hi > lo) {
            const double scale = 1.0 / (hi - lo);
            for (auto& v : out.channels[c]) v = (v - lo) * scale;
        } else {
            for (auto& v : out.channels[c]) v = 0.0;
            used.constant_channels.insert(name);
        }
    }
    return {std::move(out), std::move(used)};
}

// ---- segmentation ----

SegmentizeResult segmentize(const TimeSeries& series, const SeasonalityConfig& config) {
    if (config.n < 2) throw std::invalid_argument("segmentize: n must be >= 2");
    SegmentizeResult result;
    const auto& values = series.output();

    std::size_t offset = 0;
    if (config.align_midnight) {
        const int hod = hour_of_day(series.start_time);
        offset = static_cast<std::size_t>((24 - hod) % 24);
        if (offset >= values.size()) {
            result.skipped_leading = values.size();
            return result;
        }
        result.skipped_leading = offset;
    }

    const std::size_t usable = values.size() - offset;
    const std::size_t n = static_cast<std::size_t>(config.n);
    const std::size_t count = usable / n;
    result.remainder = usable - count * n;
    result.segments.reserve(count);
    for (std::size_t d = 0; d < count; ++d) {
        Segment seg;
        seg.source_cell = series.cell_id;
        seg.day_index = static_cast<int>(d);
        seg.values.assign(values.begin() + static_cast<long>(offset + d * n),
                          values.begin() + static_cast<long>(offset + (d + 1) * n));
        result.segments.push_back(std::move(seg));
    }
    return result;
}

SegmentSet consolidate(const std::vector<std::vector<Segment>>& per_cell_segments) {
    SegmentSet set;
    std::size_t expected = 0;
    for (const auto& list : per_cell_segments) {
        for (const auto& seg : list) {
            if (expected == 0) expected = seg.values.size();
            if (seg.values.size() != expected)
                throw std::invalid_argument(
                    "consolidate: segment length " + std::to_string(seg.values.size()) +
                    " from cell " + seg.source_cell + " differs from " +
                    std::to_string(expected));
            set.push_back(seg);
        }
    }
    return set;
}

// ---- feature selection / engineering ----

namespace {

// Pearson correlation; returns 0 and sets zero_variance when either side has
// no variance.
double pearson(const std::vector<double>& a, const std::vector<double>& b,
               bool* zero_variance) {
    const std::size_t n = a.size();
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - mean_a, db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) {
        if (zero_variance) *zero_variance = true;
        return 0.0;
    }
    if (zero_variance) *zero_variance = false;
    return cov / std::sqrt(var_a * var_b);
}

std::vector<double> pooled_channel(const std::vector<TimeSeries>& series_set,
                                   const std::string& name) {
    std::vector<double> pooled;
    for (const auto& s : series_set) {
        const auto& ch = s.channel(name);
        pooled.insert(pooled.end(), ch.begin(), ch.end());
    }
    return pooled;
}

}  // namespace

PearsonResult pearson_select(const std::vector<TimeSeries>& series_set,
                             double threshold) {
    if (series_set.empty())
        throw std::invalid_argument("pearson_select: empty series set");
    if (threshold <= 0.0 || threshold >= 1.0)
        throw std::invalid_argument("pearson_select: threshold must be in (0,1)");

    const auto& first = series_set.front();
    const std::string output = first.output_channel;
    const auto pooled_output = pooled_channel(series_set, output);
    if (pooled_output.size() < 2)
        throw std::invalid_argument("pearson_select: need at least 2 samples");

    PearsonResult result;
    result.channels.push_back(output);
    result.correlations[output] = 1.0;

    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& name : first.channel_names) {
        if (name == output) continue;
        bool missing = false;
        for (const auto& s : series_set)
            if (!s.has_channel(name)) {
                missing = true;
                break;
            }
        if (missing) {
            result.warnings.push_back("channel " + name +
                                      " absent from some series; skipped");
            continue;
        }
        bool zero_var = false;
        const double r =
            pearson(pooled_channel(series_set, name), pooled_output, &zero_var);
        result.correlations[name] = r;
        if (zero_var) {
            result.warnings.push_back("channel " + name +
                                      " has zero variance; excluded");
            continue;
        }
        ranked.emplace_back(r, name);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [r, name] : ranked)
        if (r > threshold) result.channels.push_back(name);
    return result;
}

FeatureConfig resolve_feature_config(FeatureVariant variant,
                                     const std::vector<TimeSeries>& series_set,
                                     double threshold, int ran_channels,
                                     const std::string& handover_in,
                                     const std::string& handover_out) {
    if (series_set.empty())
        throw std::invalid_argument("resolve_feature_config: empty series set");
    const std::string output = series_set.front().output_channel;

    FeatureConfig config;
    config.variant = variant;
    config.selected_channels = {output};

    if (variant == FeatureVariant::ran || variant == FeatureVariant::all) {
        auto selection = pearson_select(series_set, threshold);
        // rank all scored candidates so the list can be padded to the target
        // width when too few clear the threshold
        std::vector<std::pair<double, std::string>> ranked;
        for (const auto& [name, r] : selection.correlations) {
            if (name == output || name == handover_in || name == handover_out) continue;
            if (name == kPeakChannel || name == kWeekendChannel) continue;
            if (name == kHandoverInChannel || name == kHandoverOutChannel) continue;
            ranked.emplace_back(r, name);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const int extras = ran_channels - 1;
        for (int i = 0; i < extras && i < static_cast<int>(ranked.size()); ++i)
            config.selected_channels.push_back(ranked[static_cast<std::size_t>(i)].second);
    }
    if (variant == FeatureVariant::handover || variant == FeatureVariant::all) {
        config.selected_channels.push_back(kHandoverInChannel);
        config.selected_channels.push_back(kHandoverOutChannel);
    }
    if (variant == FeatureVariant::peak || variant == FeatureVariant::all) {
        config.peak_flag = true;
        config.weekend_flag = true;
    }
    return config;
}

TimeSeries engineer_peak_features(const TimeSeries& series) {
    if (series.has_channel(kPeakChannel) || series.has_channel(kWeekendChannel))
        throw std::invalid_argument("peak features already present on " +
                                    series.cell_id);
    const auto& volume = series.output();
    if (volume.empty())
        throw std::invalid_argument("engineer_peak_features: empty series");

    double hour_sum[24] = {0};
    double hour_count[24] = {0};
    double total = 0.0;
    for (std::size_t t = 0; t < volume.size(); ++t) {
        const int h = hour_of_day(series.start_time + static_cast<std::int64_t>(t));
        hour_sum[h] += volume[t];
        hour_count[h] += 1.0;
        total += volume[t];
    }
    const double overall_mean = total / static_cast<double>(volume.size());
    bool peak_hour[24];
    for (int h = 0; h < 24; ++h)
        peak_hour[h] = hour_count[h] > 0.0 && hour_sum[h] / hour_count[h] >= overall_mean;

    TimeSeries out = series;
    std::vector<double> peak(volume.size()), weekend(volume.size());
    for (std::size_t t = 0; t < volume.size(); ++t) {
        const std::int64_t hour = series.start_time + static_cast<std::int64_t>(t);
        peak[t] = peak_hour[hour_of_day(hour)] ? 1.0 : 0.0;
        weekend[t] = is_weekend(hour) ? 1.0 : 0.0;
    }
    out.channel_names.push_back(kPeakChannel);
    out.channels.push_back(std::move(peak));
    out.channel_names.push_back(kWeekendChannel);
    out.channels.push_back(std::move(weekend));
    return out;
}

TimeSeries attach_handover_features(const TimeSeries& series,
                                    const std::string& incoming,
                                    const std::string& outgoing) {
    if (!series.has_channel(incoming))
        throw std::invalid_argument("incoming handover channel absent: " + incoming);
    if (!series.has_channel(outgoing))
        throw std::invalid_argument("outgoing handover channel absent: " + outgoing);

    auto scaled = [](const std::vector<double>& v) {
        const double lo = *std::min_element(v.begin(), v.end());
        const double hi = *std::max_element(v.begin(), v.end());
        std::vector<double> out(v.size(), 0.0);
        if (hi > lo) {
            const double scale = 1.0 / (hi - lo);
            for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) * scale;
        }
        return out;
    };

    TimeSeries out = series;
    out.channel_names.push_back(kHandoverInChannel);
    out.channels.push_back(scaled(series.channel(incoming)));
    out.channel_names.push_back(kHandoverOutChannel);
    out.channels.push_back(scaled(series.channel(outgoing)));
    return out;
}

// ---- stats persistence ----

std::string norm_stats_to_json(const NormStats& stats) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, mm] : stats.minmax)
        j[name] = {{"min", mm.first}, {"max", mm.second}};
    return j.dump(2);
}

NormStats norm_stats_from_json(const std::string& text) {
    NormStats stats;
    const auto j = nlohmann::json::parse(text);
    for (auto it = j.begin(); it != j.end(); ++it) {
        const double lo = it.value().at("min").get<double>();
        const double hi = it.value().at("max").get<double>();
        stats.minmax[it.key()] = {lo, hi};
        if (!(hi > lo)) stats.constant_channels.insert(it.key());
    }
    return stats;
}

}  // namespace cellcast
