#include "cellcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "cellcast/dtw.hpp"
#include "cellcast/rng.hpp"

namespace cellcast {

std::vector<std::vector<double>> default_profiles() {
    return {
        // commuter: morning and evening peaks
        {0.10, 0.08, 0.07, 0.07, 0.08, 0.12, 0.25, 0.55, 0.82, 0.75, 0.60, 0.55,
         0.58, 0.55, 0.50, 0.52, 0.62, 0.80, 0.90, 0.78, 0.55, 0.40, 0.25, 0.15},
        // night-active: high after midnight, quiet through the day
        {0.78, 0.85, 0.88, 0.80, 0.65, 0.45, 0.30, 0.20, 0.15, 0.12, 0.10, 0.10,
         0.12, 0.12, 0.13, 0.15, 0.18, 0.22, 0.30, 0.40, 0.52, 0.62, 0.70, 0.75},
        // single evening peak
        {0.12, 0.10, 0.08, 0.08, 0.08, 0.10, 0.12, 0.15, 0.18, 0.22, 0.25, 0.28,
         0.32, 0.35, 0.38, 0.45, 0.55, 0.68, 0.80, 0.90, 0.92, 0.80, 0.55, 0.28},
        // broad midday plateau
        {0.15, 0.12, 0.10, 0.10, 0.12, 0.18, 0.28, 0.40, 0.55, 0.68, 0.75, 0.80,
         0.82, 0.80, 0.78, 0.72, 0.62, 0.50, 0.40, 0.32, 0.28, 0.25, 0.20, 0.17},
    };
}

namespace {

void check_spec(const SyntheticSpec& spec) {
    if (spec.profiles.empty()) throw std::invalid_argument("synth: no profiles");
    for (const auto& p : spec.profiles) {
        if (p.size() != 24)
            throw std::invalid_argument("synth: profiles must have 24 hourly values");
        for (const double v : p)
            if (v < 0.0 || v > 1.0)
                throw std::invalid_argument("synth: profile values must lie in [0,1]");
    }
    if (spec.cells < 1) throw std::invalid_argument("synth: cells must be >= 1");
    if (spec.weeks < 1) throw std::invalid_argument("synth: weeks must be >= 1");
    if (spec.noise_sigma < 0.0) throw std::invalid_argument("synth: noise_sigma must be >= 0");
    if (spec.weekend_scale <= 0.0)
        throw std::invalid_argument("synth: weekend_scale must be > 0");
    if (spec.dip && spec.dip->scale <= 0.0)
        throw std::invalid_argument("synth: dip scale must be > 0");
    if (spec.dip && spec.dip->start_week > spec.dip->end_week)
        throw std::invalid_argument("synth: dip start_week after end_week");
    const int p_count = static_cast<int>(spec.profiles.size());
    for (const auto& [cell, switches] : spec.regime_switches) {
        if (cell < 0 || cell >= spec.cells)
            throw std::invalid_argument("synth: switch references cell " +
                                        std::to_string(cell));
        for (const auto& s : switches) {
            if (s.week < 0 || s.week >= spec.weeks)
                throw std::invalid_argument("synth: switch week out of range");
            if (s.profile < 0 || s.profile >= p_count)
                throw std::invalid_argument("synth: switch profile out of range");
        }
    }
}

std::string cell_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "cell_%03d", index);
    return buf;
}

double clip0(double v) { return v < 0.0 ? 0.0 : v; }

}  // namespace

SyntheticData generate(const SyntheticSpec& spec) {
    check_spec(spec);

    const int p_count = static_cast<int>(spec.profiles.size());
    const int days = spec.weeks * 7;
    const std::size_t length = static_cast<std::size_t>(days) * 24;
    const std::int64_t start_time = days_from_civil(2024, 1, 1) * 24;  // a Monday

    static const std::vector<std::string> channel_names = [] {
        std::vector<std::string> names = {"dl_volume",     "prb_util", "active_users",
                                          "dl_throughput", "cqi_avg",  "ho_in",
                                          "ho_out"};
        for (int i = 1; i <= 13; ++i) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "aux_%02d", i);
            names.emplace_back(buf);
        }
        return names;
    }();

    SyntheticData data;
    data.cells.reserve(static_cast<std::size_t>(spec.cells));

    for (int cell = 0; cell < spec.cells; ++cell) {
        const std::uint64_t cell_seed = mix_seed(spec.seed, static_cast<std::uint64_t>(cell));

        // per-day generating profile
        std::vector<int> day_profile(static_cast<std::size_t>(days), cell % p_count);
        if (const auto it = spec.regime_switches.find(cell);
            it != spec.regime_switches.end()) {
            auto switches = it->second;
            std::sort(switches.begin(), switches.end(),
                      [](const RegimeSwitch& a, const RegimeSwitch& b) {
                          return a.week < b.week;
                      });
            for (int d = 0; d < days; ++d) {
                const int week = d / 7;
                for (const auto& s : switches)
                    if (week >= s.week) day_profile[static_cast<std::size_t>(d)] = s.profile;
            }
        }

        std::vector<double> volume(length);
        Rng vol_rng(mix_seed(cell_seed, 0));
        for (std::size_t t = 0; t < length; ++t) {
            const int d = static_cast<int>(t / 24);
            const int h = static_cast<int>(t % 24);
            const int week = d / 7;
            double base = spec.profiles[static_cast<std::size_t>(
                day_profile[static_cast<std::size_t>(d)])][static_cast<std::size_t>(h)];
            if (d % 7 >= 5) base *= spec.weekend_scale;
            if (spec.dip && week >= spec.dip->start_week && week <= spec.dip->end_week)
                base *= spec.dip->scale;
            volume[t] = clip0(base + spec.noise_sigma * vol_rng.next_gaussian());
        }

        TimeSeries series;
        series.cell_id = cell_name(cell);
        series.start_time = start_time;
        series.channel_names = channel_names;
        series.channels.reserve(channel_names.size());
        series.channels.push_back(volume);

        // tightly correlated companions: affine copies with small noise
        struct Affine {
            double slope, offset, noise;
        };
        static constexpr Affine corr[4] = {{0.80, 0.10, 0.010},
                                           {0.65, 0.05, 0.010},
                                           {0.90, 0.02, 0.015},
                                           {0.50, 0.30, 0.012}};
        for (int c = 0; c < 4; ++c) {
            Rng rng(mix_seed(cell_seed, 100 + static_cast<std::uint64_t>(c)));
            std::vector<double> ch(length);
            for (std::size_t t = 0; t < length; ++t)
                ch[t] = clip0(corr[c].slope * volume[t] + corr[c].offset +
                              corr[c].noise * rng.next_gaussian());
            series.channels.push_back(std::move(ch));
        }

        // handover counts: lagged volume plus noise
        {
            Rng rng_in(mix_seed(cell_seed, 200));
            Rng rng_out(mix_seed(cell_seed, 201));
            std::vector<double> ho_in(length), ho_out(length);
            for (std::size_t t = 0; t < length; ++t) {
                const double lagged = volume[t > 0 ? t - 1 : 0];
                ho_in[t] = clip0(0.60 * lagged + 0.05 + 0.020 * rng_in.next_gaussian());
                ho_out[t] = clip0(0.45 * lagged + 0.08 + 0.020 * rng_out.next_gaussian());
            }
            series.channels.push_back(std::move(ho_in));
            series.channels.push_back(std::move(ho_out));
        }

        for (int c = 0; c < 13; ++c) {
            Rng rng(mix_seed(cell_seed, 300 + static_cast<std::uint64_t>(c)));
            std::vector<double> ch(length);
            for (std::size_t t = 0; t < length; ++t)
                ch[t] = clip0(0.50 + 0.15 * rng.next_gaussian());
            series.channels.push_back(std::move(ch));
        }

        data.cells.push_back(std::move(series));
        for (int d = 0; d < days; ++d)
            data.labels.push_back(
                {cell_name(cell), d, day_profile[static_cast<std::size_t>(d)]});
    }

    data.min_profile_separation = 0.0;
    if (p_count >= 2) {
        double min_sep = std::numeric_limits<double>::infinity();
        for (int a = 0; a < p_count; ++a)
            for (int b = a + 1; b < p_count; ++b)
                min_sep = std::min(min_sep,
                                   dtw_distance(spec.profiles[static_cast<std::size_t>(a)],
                                                spec.profiles[static_cast<std::size_t>(b)]));
        data.min_profile_separation = min_sep;
    }
    return data;
}

std::pair<std::vector<TimeSeries>, TimeSeries> holdout_split(
    const std::vector<TimeSeries>& dataset, const std::string& holdout_cell) {
    std::vector<TimeSeries> train;
    std::vector<const TimeSeries*> matches;
    for (const auto& series : dataset) {
        if (series.cell_id == holdout_cell)
            matches.push_back(&series);
        else
            train.push_back(series);
    }
    if (matches.empty())
        throw std::invalid_argument("holdout_split: unknown cell " + holdout_cell);
    if (matches.size() > 1)
        throw std::invalid_argument("holdout_split: cell " + holdout_cell +
                                    " spans multiple series; cannot hold out");
    return {std::move(train), *matches.front()};
}

void write_data_csv(const std::vector<TimeSeries>& cells, const std::string& path) {
    if (cells.empty()) throw std::invalid_argument("write_data_csv: no series");
    const auto& names = cells.front().channel_names;
    for (const auto& series : cells)
        if (series.channel_names != names)
            throw std::invalid_argument("write_data_csv: mixed channel layouts");

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "cell_id,timestamp";
    for (const auto& name : names) out << ',' << name;
    out << '\n';

    char buf[32];
    for (const auto& series : cells) {
        for (std::size_t t = 0; t < series.length(); ++t) {
            out << series.cell_id << ','
                << format_iso_hour(series.start_time + static_cast<std::int64_t>(t));
            for (const auto& ch : series.channels) {
                std::snprintf(buf, sizeof(buf), "%.12g", ch[t]);
                out << ',' << buf;
            }
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_labels_csv(const std::vector<DayLabel>& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "cell_id,day_index,profile\n";
    for (const auto& label : labels)
        out << label.cell_id << ',' << label.day_index << ',' << label.profile << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<DayLabel> read_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "cell_id,day_index,profile")
        throw std::invalid_argument(path + ": not a labels file");
    std::vector<DayLabel> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        DayLabel label;
        std::string day, profile;
        if (!std::getline(ss, label.cell_id, ',') || !std::getline(ss, day, ',') ||
            !std::getline(ss, profile))
            throw std::invalid_argument(path + ": malformed row at line " +
                                        std::to_string(line_no));
        label.day_index = std::stoi(day);
        label.profile = std::stoi(profile);
        labels.push_back(std::move(label));
    }
    return labels;
}

}  // namespace cellcast
