// cellcast command-line pipeline: synth | ingest | cluster | train | eval |
// report | ood-recluster. Artifacts live under store/<run-id>/ with a
// manifest of content hashes; every command is deterministic given the same
// inputs and seed. Exit codes: 0 success, 1 internal error, 2 usage/config.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cellcast/adaptive.hpp"
#include "cellcast/evaluation.hpp"
#include "cellcast/kmeans.hpp"
#include "cellcast/predictor.hpp"
#include "cellcast/rng.hpp"
#include "cellcast/synth.hpp"
#include "cellcast/timeseries.hpp"

namespace fs = std::filesystem;
using cellcast::SegmentSet;
using cellcast::TimeSeries;

namespace {

// Everything the subcommands can be configured with; each subcommand binds
// the subset it uses. Values come from flags or the --config file.
struct RunConfig {
    // paths
    std::string data;
    std::string store = "store";
    std::string run_id = "run";
    std::string out_dir = "data";
    std::string out_file;
    // seasonality
    int n = 24;
    int m = 1;
    bool align_midnight = false;
    // dtw
    double q = 2.0;
    int band = -1;  // <0 = unconstrained
    // clustering sweep
    std::vector<int> k_values{1, 2, 4, 8};
    int kmeans_max_iter = 100;
    int dba_max_iter = 30;
    double dba_tol = 1e-5;
    // predictor + training protocol
    std::string predictor_kind = "lstm";
    int hidden = 48;
    cellcast::TrainingProtocol protocol;
    std::string features = "uni";
    double pearson_threshold = 0.9;
    int ran_channels = 5;
    std::string handover_in = "ho_in";
    std::string handover_out = "ho_out";
    // adaptive serving
    int cadence = 1;
    std::string mode = "trailing";
    bool ood = false;
    double ood_quantile = 0.99;
    int ood_buffer_min = 3;
    // shared
    std::uint64_t seed = 0;
    std::string holdout;
    int max_impute_gap = 2;
    // synth
    int cells = 20;
    int weeks = 12;
    int profiles = 4;
    double sigma = 0.05;
    double weekend_scale = 1.0;
    std::vector<std::string> switches;
    std::string dip;
    // report
    std::vector<std::string> report_runs;
};

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::json load_manifest(const fs::path& run_dir) {
    const fs::path path = run_dir / "manifest.json";
    if (fs::exists(path)) return nlohmann::json::parse(read_file(path));
    return {{"artifacts", nlohmann::json::object()}, {"notes", nlohmann::json::array()}};
}

void save_manifest(const fs::path& run_dir, const nlohmann::json& manifest) {
    write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
}

void record_artifact(nlohmann::json& manifest, const std::string& name,
                     const std::string& bytes) {
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    manifest["artifacts"][name] = {{"bytes", bytes.size()}, {"fnv1a64", hex}};
}

void add_note(nlohmann::json& manifest, const std::string& note) {
    for (const auto& existing : manifest["notes"])
        if (existing == note) return;  // reruns must stay byte-identical
    manifest["notes"].push_back(note);
}

void write_artifact(const fs::path& run_dir, nlohmann::json& manifest,
                    const std::string& name, const std::string& content) {
    write_file(run_dir / name, content);
    record_artifact(manifest, name, content);
}

std::vector<TimeSeries> load_cells(const RunConfig& cfg, cellcast::IngestReport* report) {
    if (!fs::exists(cfg.data))
        throw std::invalid_argument("data file not found: " + cfg.data);
    cellcast::IngestOptions options;
    options.max_impute_gap = cfg.max_impute_gap;
    return cellcast::ingest_csv(cfg.data, options, report);
}

// training view of the data: the held-out cell (when set) must exist and is
// removed
std::vector<TimeSeries> training_cells(const RunConfig& cfg,
                                       const std::vector<TimeSeries>& cells) {
    if (cfg.holdout.empty()) return cells;
    std::vector<TimeSeries> train;
    bool found = false;
    for (const auto& series : cells) {
        if (series.cell_id == cfg.holdout)
            found = true;
        else
            train.push_back(series);
    }
    if (!found)
        throw std::invalid_argument("held-out cell " + cfg.holdout +
                                    " not present in " + cfg.data);
    if (train.empty())
        throw std::invalid_argument("no training cells left after holding out " +
                                    cfg.holdout);
    return train;
}

cellcast::DtwParams dtw_params(const RunConfig& cfg) {
    cellcast::DtwParams params;
    params.q = cfg.q;
    if (cfg.band >= 0) params.band = cfg.band;
    return params;
}

cellcast::SeasonalityConfig season_of(const RunConfig& cfg) {
    cellcast::SeasonalityConfig season;
    season.n = cfg.n;
    season.m = cfg.m;
    season.align_midnight = cfg.align_midnight;
    return season;
}

SegmentSet training_segments(const std::vector<TimeSeries>& processed,
                             const cellcast::SeasonalityConfig& season) {
    std::vector<std::vector<cellcast::Segment>> per_cell;
    per_cell.reserve(processed.size());
    for (const auto& series : processed)
        per_cell.push_back(cellcast::segmentize(series, season).segments);
    return cellcast::consolidate(per_cell);
}

void write_segments_csv(const SegmentSet& segments, const fs::path& path) {
    if (segments.empty())
        throw std::invalid_argument("no segments to write to " + path.string());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "source_cell,day_index";
    for (std::size_t i = 0; i < segments.front().values.size(); ++i) out << ",v" << i;
    out << '\n';
    char buf[32];
    for (const auto& seg : segments) {
        out << seg.source_cell << ',' << seg.day_index;
        for (const double v : seg.values) {
            std::snprintf(buf, sizeof(buf), "%.12g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

SegmentSet read_segments_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("source_cell,day_index", 0) != 0)
        throw std::invalid_argument(path.string() + ": not a segments file");
    SegmentSet segments;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        cellcast::Segment seg;
        std::string field;
        if (!std::getline(ss, seg.source_cell, ',') || !std::getline(ss, field, ','))
            throw std::invalid_argument(path.string() + ": malformed row at line " +
                                        std::to_string(line_no));
        seg.day_index = std::stoi(field);
        while (std::getline(ss, field, ',')) seg.values.push_back(std::stod(field));
        if (seg.values.empty())
            throw std::invalid_argument(path.string() + ": empty segment at line " +
                                        std::to_string(line_no));
        segments.push_back(std::move(seg));
    }
    return segments;
}

std::string k_name(const char* prefix, int k, const char* suffix) {
    return std::string(prefix) + std::to_string(k) + suffix;
}

// ---- subcommands ----

int cmd_synth(const RunConfig& cfg) {
    cellcast::SyntheticSpec spec;
    auto all_profiles = cellcast::default_profiles();
    if (cfg.profiles > static_cast<int>(all_profiles.size()))
        throw std::invalid_argument("only " + std::to_string(all_profiles.size()) +
                                    " built-in profiles available");
    all_profiles.resize(static_cast<std::size_t>(cfg.profiles));
    spec.profiles = std::move(all_profiles);
    spec.cells = cfg.cells;
    spec.weeks = cfg.weeks;
    spec.noise_sigma = cfg.sigma;
    spec.weekend_scale = cfg.weekend_scale;
    spec.seed = cfg.seed;
    for (const auto& text : cfg.switches) {
        int cell = 0, week = 0, profile = 0;
        if (std::sscanf(text.c_str(), "%d:%d:%d", &cell, &week, &profile) != 3)
            throw std::invalid_argument("--switch wants CELL:WEEK:PROFILE, got " + text);
        spec.regime_switches[cell].push_back({week, profile});
    }
    if (!cfg.dip.empty()) {
        cellcast::DipSpec dip;
        if (std::sscanf(cfg.dip.c_str(), "%d:%d:%lf", &dip.start_week, &dip.end_week,
                        &dip.scale) != 3)
            throw std::invalid_argument("--dip wants START:END:SCALE, got " + cfg.dip);
        spec.dip = dip;
    }

    const auto data = cellcast::generate(spec);
    fs::create_directories(cfg.out_dir);
    const fs::path data_path = fs::path(cfg.out_dir) / "synth_data.csv";
    const fs::path labels_path = fs::path(cfg.out_dir) / "synth_labels.csv";
    cellcast::write_data_csv(data.cells, data_path.string());
    cellcast::write_labels_csv(data.labels, labels_path.string());

    char sep[32];
    std::snprintf(sep, sizeof(sep), "%.6g", data.min_profile_separation);
    std::cout << "wrote " << data_path.string() << " and " << labels_path.string()
              << ": " << cfg.cells << " cells x " << cfg.weeks
              << " weeks, min profile separation " << sep << "\n";
    return 0;
}

int cmd_ingest(const RunConfig& cfg) {
    cellcast::IngestReport report;
    const auto cells = load_cells(cfg, &report);
    std::cout << "read " << report.rows_read << " rows into " << cells.size()
              << " series (" << report.rows_imputed << " imputed, "
              << report.rows_dropped << " dropped)\n";
    for (const auto& warning : report.warnings)
        std::cerr << "warning: " << warning << "\n";
    if (!cfg.out_file.empty()) {
        cellcast::write_data_csv(cells, cfg.out_file);
        std::cout << "wrote cleaned copy to " << cfg.out_file << "\n";
    }
    return 0;
}

int cmd_cluster(const RunConfig& cfg) {
    const auto cells = training_cells(cfg, load_cells(cfg, nullptr));
    const auto processed =
        cellcast::preprocess_cells(cells, cfg.handover_in, cfg.handover_out);
    const auto season = season_of(cfg);
    const auto segments = training_segments(processed, season);

    const fs::path run_dir = fs::path(cfg.store) / cfg.run_id;
    fs::create_directories(run_dir);
    auto manifest = load_manifest(run_dir);

    for (const int k : cfg.k_values) {
        const auto model = cellcast::fit(segments, k, dtw_params(cfg),
                                         cfg.kmeans_max_iter,
                                         cellcast::mix_seed(cfg.seed, 0x434c5553),
                                         cfg.dba_max_iter, cfg.dba_tol);
        write_artifact(run_dir, manifest, k_name("cluster_k", k, ".json"),
                       cellcast::cluster_model_to_json(model) + "\n");
        char inertia[32];
        std::snprintf(inertia, sizeof(inertia), "%.6g", model.inertia);
        std::cout << "k=" << k << ": inertia " << inertia << " after "
                  << model.iterations_run << " iterations, sizes";
        for (const int size : cellcast::cluster_sizes(model)) std::cout << ' ' << size;
        std::cout << "\n";
    }
    save_manifest(run_dir, manifest);
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    const auto cells = training_cells(cfg, load_cells(cfg, nullptr));
    const auto processed =
        cellcast::preprocess_cells(cells, cfg.handover_in, cfg.handover_out);
    const auto variant = cellcast::feature_variant_from_string(cfg.features);
    const auto feature_config = cellcast::resolve_feature_config(
        variant, processed, cfg.pearson_threshold, cfg.ran_channels, cfg.handover_in,
        cfg.handover_out);

    cellcast::PredictorSpec spec;
    spec.kind = cellcast::predictor_kind_from_string(cfg.predictor_kind);
    spec.window = cfg.n;
    spec.horizon = cfg.m;
    spec.hidden_size = cfg.hidden;
    spec.features = feature_config;
    spec.seed = cellcast::mix_seed(cfg.seed, 0x50524544);

    const fs::path run_dir = fs::path(cfg.store) / cfg.run_id;
    fs::create_directories(run_dir);
    auto manifest = load_manifest(run_dir);

    for (const int k : cfg.k_values) {
        const fs::path cluster_path = run_dir / k_name("cluster_k", k, ".json");
        if (!fs::exists(cluster_path))
            throw std::invalid_argument("missing cluster model " + cluster_path.string() +
                                        "; run the cluster command first");
        const auto cluster = cellcast::cluster_model_from_json(read_file(cluster_path));
        const auto training =
            cellcast::train_per_cluster(cluster, processed, spec, cfg.protocol);
        for (const auto& [c, model] : training.models)
            write_artifact(run_dir, manifest,
                           k_name("predictor_k", k, ("_c" + std::to_string(c) + ".json").c_str()),
                           cellcast::predictor_model_to_json(model) + "\n");
        for (const auto& warning : training.warnings) {
            add_note(manifest, "k=" + std::to_string(k) + ": " + warning);
            std::cerr << "warning: k=" << k << ": " << warning << "\n";
        }
        std::cout << "k=" << k << ": trained " << training.models.size() << " "
                  << cfg.features << " models, window counts";
        for (const int count : training.window_counts) std::cout << ' ' << count;
        std::cout << "\n";
    }
    save_manifest(run_dir, manifest);
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    if (cfg.holdout.empty())
        throw std::invalid_argument("eval needs --holdout CELL to score");
    const auto cells = load_cells(cfg, nullptr);

    const TimeSeries* stream = nullptr;
    for (const auto& series : cells) {
        if (series.cell_id != cfg.holdout) continue;
        if (stream)
            throw std::invalid_argument("held-out cell " + cfg.holdout +
                                        " maps to several series (gap-split data?)");
        stream = &series;
    }
    if (!stream)
        throw std::invalid_argument("held-out cell " + cfg.holdout + " not present in " +
                                    cfg.data);

    const fs::path run_dir = fs::path(cfg.store) / cfg.run_id;
    auto manifest = load_manifest(run_dir);

    for (const int k : cfg.k_values) {
        const fs::path cluster_path = run_dir / k_name("cluster_k", k, ".json");
        if (!fs::exists(cluster_path))
            throw std::invalid_argument("missing cluster model " + cluster_path.string());
        const auto cluster = cellcast::cluster_model_from_json(read_file(cluster_path));

        std::map<int, cellcast::PredictorModel> models;
        for (int c = 0; c < k; ++c) {
            const fs::path path =
                run_dir / k_name("predictor_k", k, ("_c" + std::to_string(c) + ".json").c_str());
            if (!fs::exists(path))
                throw std::invalid_argument("missing predictor model " + path.string() +
                                            "; run the train command first");
            models[c] = cellcast::predictor_model_from_json(read_file(path));
        }
        const auto& spec = models.at(0).spec;
        const std::string config_name = cellcast::to_string(spec.features.variant);

        nlohmann::json report_json;
        if (stream->length() < static_cast<std::size_t>(spec.window + spec.horizon)) {
            std::cerr << "warning: k=" << k << ": held-out stream has "
                      << stream->length() << " hours, fewer than window+horizon="
                      << spec.window + spec.horizon << "; no step can be scored\n";
            report_json = {{"cell", cfg.holdout},
                           {"config", config_name},
                           {"k", k},
                           {"scored_steps", 0},
                           {"warning", "held-out stream too short; MAE omitted"}};
            write_artifact(run_dir, manifest, k_name("report_k", k, ".json"),
                           report_json.dump(2) + "\n");
            continue;
        }

        cellcast::StreamOptions options;
        options.season.n = spec.window;
        options.season.m = spec.horizon;
        options.cadence = cfg.cadence;
        options.mode = cellcast::assign_mode_from_string(cfg.mode);
        options.stats = nullptr;  // the held-out cell is served as unseen
        options.handover_in_source = cfg.handover_in;
        options.handover_out_source = cfg.handover_out;
        if (cfg.ood) {
            RunConfig train_view = cfg;  // policy comes from the other cells
            const auto train = training_cells(train_view, cells);
            const auto processed =
                cellcast::preprocess_cells(train, cfg.handover_in, cfg.handover_out);
            auto season = season_of(cfg);
            season.n = spec.window;
            season.m = spec.horizon;
            const auto segments = training_segments(processed, season);
            options.ood = cellcast::derive_ood_policy(cluster, segments, cfg.ood_quantile,
                                                      cfg.ood_buffer_min);
        }

        const auto trace = cellcast::run_stream(cluster, models, *stream, options);
        const auto report = cellcast::evaluate(trace);

        const fs::path trace_path = run_dir / k_name("trace_k", k, ".csv");
        cellcast::write_trace_csv(trace, trace_path.string());
        record_artifact(manifest, k_name("trace_k", k, ".csv"), read_file(trace_path));

        report_json = nlohmann::json::parse(cellcast::evaluation_report_to_json(report));
        report_json["cell"] = cfg.holdout;
        report_json["config"] = config_name;
        report_json["k"] = k;
        report_json["scored_steps"] =
            static_cast<int>(trace.steps.size()) - report.fallback_count;
        if (options.ood) report_json["ood_threshold"] = options.ood->threshold;
        write_artifact(run_dir, manifest, k_name("report_k", k, ".json"),
                       report_json.dump(2) + "\n");

        if (options.ood && !trace.ood_buffer.empty()) {
            const fs::path buffer_path = run_dir / k_name("ood_buffer_k", k, ".csv");
            write_segments_csv(trace.ood_buffer, buffer_path);
            record_artifact(manifest, k_name("ood_buffer_k", k, ".csv"),
                            read_file(buffer_path));
        }

        char mae[32];
        std::snprintf(mae, sizeof(mae), "%.6g", report.weighted_mae);
        std::cout << "k=" << k << " (" << config_name << "): weighted MAE " << mae
                  << " over " << report_json["scored_steps"] << " steps, "
                  << report.fallback_count << " warm-up, " << report.ood_count
                  << " flagged\n";
    }
    save_manifest(run_dir, manifest);
    return 0;
}

int cmd_report(const RunConfig& cfg) {
    if (!fs::exists(cfg.store))
        throw std::invalid_argument("store not found: " + cfg.store);
    std::vector<std::string> runs = cfg.report_runs;
    if (runs.empty()) {
        for (const auto& entry : fs::directory_iterator(cfg.store))
            if (entry.is_directory()) runs.push_back(entry.path().filename().string());
        std::sort(runs.begin(), runs.end());
    }
    if (runs.empty())
        throw std::invalid_argument("store " + cfg.store + " has no run directories");

    static const char* kMetrics[] = {"weighted_mae", "overall_mae", "fallback_mae",
                                     "fallback_count", "ood_count"};
    std::vector<cellcast::SweepRow> rows;
    for (const auto& run : runs) {
        const fs::path run_dir = fs::path(cfg.store) / run;
        if (!fs::exists(run_dir))
            throw std::invalid_argument("run directory not found: " + run_dir.string());
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(run_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("report_k", 0) == 0 && name.size() > 5 &&
                name.substr(name.size() - 5) == ".json")
                files.push_back(name);
        }
        std::sort(files.begin(), files.end());
        for (const auto& name : files) {
            const auto j = nlohmann::json::parse(read_file(run_dir / name));
            const int k = j.value("k", 0);
            const std::string config = j.value("config", "unknown");
            for (const char* metric : kMetrics)
                if (j.contains(metric) && j[metric].is_number())
                    rows.push_back({k, config, metric, j[metric].get<double>()});
        }
    }
    if (rows.empty())
        throw std::invalid_argument("no eval reports found under " + cfg.store);

    const fs::path csv_path = fs::path(cfg.store) / "report.csv";
    const fs::path json_path = fs::path(cfg.store) / "report.json";
    cellcast::write_sweep_csv(rows, csv_path.string());
    write_file(json_path, cellcast::sweep_to_json(rows) + "\n");
    std::cout << "wrote " << rows.size() << " rows to " << csv_path.string() << " and "
              << json_path.string() << "\n";
    return 0;
}

int cmd_ood_recluster(const RunConfig& cfg) {
    if (cfg.k_values.size() != 1)
        throw std::invalid_argument("ood-recluster wants exactly one --k value");
    const int k = cfg.k_values.front();

    const fs::path run_dir = fs::path(cfg.store) / cfg.run_id;
    const fs::path cluster_path = run_dir / k_name("cluster_k", k, ".json");
    if (!fs::exists(cluster_path))
        throw std::invalid_argument("missing cluster model " + cluster_path.string());
    const fs::path buffer_path = run_dir / k_name("ood_buffer_k", k, ".csv");
    if (!fs::exists(buffer_path))
        throw std::invalid_argument("no buffered windows at " + buffer_path.string() +
                                    "; run eval --ood first");

    const auto cluster = cellcast::cluster_model_from_json(read_file(cluster_path));
    const auto buffer = read_segments_csv(buffer_path);
    const auto cells = training_cells(cfg, load_cells(cfg, nullptr));
    const auto processed =
        cellcast::preprocess_cells(cells, cfg.handover_in, cfg.handover_out);
    auto season = season_of(cfg);
    season.n = cluster.n;
    const auto segments = training_segments(processed, season);

    const auto result = cellcast::ood_recluster(segments, buffer, cluster, cluster.params,
                                                cfg.ood_buffer_min);

    auto manifest = load_manifest(run_dir);
    write_artifact(run_dir, manifest, k_name("cluster_k", k + 1, "_ood.json"),
                   cellcast::cluster_model_to_json(result.model) + "\n");
    nlohmann::json summary = {{"old_k", k},
                              {"new_k", result.model.k},
                              {"buffer_segments", buffer.size()},
                              {"seed_to_nearest_old", result.seed_to_nearest_old},
                              {"degenerate", result.degenerate}};
    write_artifact(run_dir, manifest, k_name("recluster_k", k, ".json"),
                   summary.dump(2) + "\n");
    save_manifest(run_dir, manifest);

    char dist[32];
    std::snprintf(dist, sizeof(dist), "%.6g", result.seed_to_nearest_old);
    std::cout << "refit " << k << " -> " << result.model.k << " clusters from "
              << buffer.size() << " buffered windows; new seed sits " << dist
              << " from the nearest old centroid"
              << (result.degenerate ? " (degenerate: buffer matches an existing cluster)"
                                    : "")
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hourly cell-traffic forecasting with DTW clustering and adaptive "
                 "per-cluster models"};
    app.set_config("--config", "", "flat dotted-key config file; flags win");
    app.require_subcommand(1);

    RunConfig cfg;
    int command = 0;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--out", cfg.out_dir, "output directory");
    synth->add_option("--cells", cfg.cells, "number of cells")->check(CLI::Range(1, 100000));
    synth->add_option("--weeks", cfg.weeks, "weeks of hourly data")
        ->check(CLI::Range(1, 10000));
    synth->add_option("--profiles", cfg.profiles, "how many built-in daily shapes")
        ->check(CLI::Range(1, 16));
    synth->add_option("--sigma", cfg.sigma, "noise standard deviation")
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--weekend-scale", cfg.weekend_scale, "weekend volume multiplier");
    synth->add_option("--switch", cfg.switches,
                      "CELL:WEEK:PROFILE regime switch (repeatable)");
    synth->add_option("--dip", cfg.dip, "START:END:SCALE demand dip over weeks");
    synth->add_option("--seed", cfg.seed, "generator seed");
    synth->callback([&] { command = 1; });

    auto* ingest = app.add_subcommand("ingest", "validate and clean a raw data CSV");
    ingest->add_option("--data", cfg.data, "input CSV")->required();
    ingest->add_option("--out", cfg.out_file, "write the cleaned copy here");
    ingest->add_option("--max-impute-gap", cfg.max_impute_gap,
                       "longest missing-hour gap to interpolate");
    ingest->callback([&] { command = 2; });

    auto* cluster = app.add_subcommand("cluster", "fit day-shape clusters per k");
    auto* train = app.add_subcommand("train", "train per-cluster predictors");
    auto* eval = app.add_subcommand("eval", "stream the held-out cell and score it");
    auto* report = app.add_subcommand("report", "merge eval reports into one table");
    auto* recluster =
        app.add_subcommand("ood-recluster", "grow the cluster model from buffered windows");

    for (auto* sub : {cluster, train, eval, recluster}) {
        sub->add_option("--data", cfg.data, "input CSV")->required();
        sub->add_option("--store", cfg.store, "model store directory");
        sub->add_option("--run-id", cfg.run_id, "run directory inside the store");
        sub->add_option("--holdout", cfg.holdout, "cell id excluded from training");
        sub->add_option("--seed", cfg.seed, "run seed");
        sub->add_option("--max-impute-gap", cfg.max_impute_gap,
                        "longest missing-hour gap to interpolate");
        sub->add_option("--handover-in", cfg.handover_in, "incoming handover channel");
        sub->add_option("--handover-out", cfg.handover_out, "outgoing handover channel");
    }
    for (auto* sub : {cluster, train, eval})
        sub->add_option("--k", cfg.k_values, "cluster counts to sweep")
            ->delimiter(',')
            ->check(CLI::PositiveNumber);

    cluster->add_option("--n", cfg.n, "seasonal period (hours)")->check(CLI::Range(2, 10000));
    cluster->add_option("--m", cfg.m, "forecast horizon")->check(CLI::PositiveNumber);
    cluster->add_flag("--align-midnight", cfg.align_midnight,
                      "snap day segments to midnight");
    cluster->add_option("--q", cfg.q, "DTW cost exponent");
    cluster->add_option("--band", cfg.band, "DTW band half-width (omit for none)");
    cluster->add_option("--kmeans-max-iter", cfg.kmeans_max_iter, "Lloyd iteration cap");
    cluster->add_option("--dba-max-iter", cfg.dba_max_iter, "barycenter iteration cap");
    cluster->add_option("--dba-tol", cfg.dba_tol, "barycenter convergence tolerance");
    cluster->callback([&] { command = 3; });

    train->add_option("--features", cfg.features, "uni|ran|peak|handover|all");
    train->add_option("--predictor", cfg.predictor_kind, "lstm|seasonal_naive");
    train->add_option("--n", cfg.n, "input window (hours)")->check(CLI::Range(2, 10000));
    train->add_option("--m", cfg.m, "forecast horizon")->check(CLI::PositiveNumber);
    train->add_option("--hidden", cfg.hidden, "LSTM state width")->check(CLI::PositiveNumber);
    train->add_option("--epochs", cfg.protocol.epochs)->check(CLI::PositiveNumber);
    train->add_option("--lr0", cfg.protocol.lr0, "initial learning rate");
    train->add_option("--momentum", cfg.protocol.momentum);
    train->add_option("--batch-size", cfg.protocol.batch_size)->check(CLI::PositiveNumber);
    train->add_option("--plateau-patience", cfg.protocol.plateau_patience);
    train->add_option("--early-stop-patience", cfg.protocol.early_stop_patience);
    train->add_option("--val-fraction", cfg.protocol.validation_fraction);
    train->add_option("--pearson-threshold", cfg.pearson_threshold,
                      "correlation cut for the ran config");
    train->add_option("--ran-channels", cfg.ran_channels,
                      "total channels in the ran config");
    train->callback([&] { command = 4; });

    eval->add_option("--cadence", cfg.cadence, "steps between reassignments")
        ->check(CLI::PositiveNumber);
    eval->add_flag("--align-midnight", cfg.align_midnight,
                   "snap policy-derivation segments to midnight");
    eval->add_option("--mode", cfg.mode, "trailing|target_day assignment window");
    eval->add_flag("--ood", cfg.ood, "derive an out-of-distribution policy and buffer");
    eval->add_option("--ood-quantile", cfg.ood_quantile, "training-distance quantile");
    eval->add_option("--ood-buffer-min", cfg.ood_buffer_min,
                     "buffered windows needed before reclustering");
    eval->callback([&] { command = 5; });

    report->add_option("--store", cfg.store, "model store directory");
    report->add_option("--run-id", cfg.report_runs,
                       "run directories to merge (default: all)");
    report->callback([&] { command = 6; });

    recluster->add_option("--k", cfg.k_values, "which cluster model to grow")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    recluster->add_option("--n", cfg.n, "seasonal period (hours)");
    recluster->add_flag("--align-midnight", cfg.align_midnight,
                        "snap day segments to midnight");
    recluster->add_option("--ood-buffer-min", cfg.ood_buffer_min,
                          "buffered windows needed to refit");
    recluster->callback([&] { command = 7; });

    for (auto* sub : {synth, ingest, cluster, train, eval, report, recluster}) {
        sub->configurable();
        // lets `cellcast synth --config f` reach the app-level --config option
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        switch (command) {
            case 1: return cmd_synth(cfg);
            case 2: return cmd_ingest(cfg);
            case 3: return cmd_cluster(cfg);
            case 4: return cmd_train(cfg);
            case 5: return cmd_eval(cfg);
            case 6: return cmd_report(cfg);
            case 7: return cmd_ood_recluster(cfg);
            default: return 2;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
