#include "cellcast/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "cellcast/rng.hpp"

namespace cellcast {

namespace {

void check_segments(const SegmentSet& segments, int k) {
    if (segments.empty()) throw std::invalid_argument("fit: empty segment set");
    if (k < 1) throw std::invalid_argument("fit: k must be >= 1");
    if (static_cast<std::size_t>(k) > segments.size())
        throw std::invalid_argument("fit: k=" + std::to_string(k) + " exceeds " +
                                    std::to_string(segments.size()) + " segments");
    const std::size_t n = segments.front().values.size();
    if (n == 0) throw std::invalid_argument("fit: zero-length segments");
    for (const auto& s : segments)
        if (s.values.size() != n)
            throw std::invalid_argument("fit: segments have mixed lengths");
}

// k-means++ seeding on squared DTW distances. Already-chosen segments carry
// zero weight, so duplicates are never picked while any mass remains; when the
// total mass hits zero the next pick falls back to uniform over the rest.
std::vector<std::vector<double>> seed_centroids(const SegmentSet& segments, int k,
                                                const DtwParams& params, Rng& rng) {
    const std::size_t n_seg = segments.size();
    std::vector<bool> chosen(n_seg, false);
    std::vector<std::size_t> picks;
    picks.push_back(rng.next_index(n_seg));
    chosen[picks.back()] = true;

    std::vector<double> d2(n_seg, std::numeric_limits<double>::infinity());
    for (int c = 1; c < k; ++c) {
        const auto& last = segments[picks.back()].values;
        double total = 0.0;
        for (std::size_t i = 0; i < n_seg; ++i) {
            const double d = dtw_distance(segments[i].values, last, params);
            d2[i] = std::min(d2[i], d * d);
            if (chosen[i]) d2[i] = 0.0;
            total += d2[i];
        }
        std::size_t pick = n_seg;
        if (total > 0.0) {
            const double r = rng.next_double() * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n_seg; ++i) {
                cum += d2[i];
                if (cum > r) {
                    pick = i;
                    break;
                }
            }
            if (pick == n_seg) {  // guard against rounding at the top end
                for (std::size_t i = n_seg; i-- > 0;)
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
            }
        }
        if (pick == n_seg) {
            // every remaining segment duplicates a chosen one
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < n_seg; ++i)
                if (!chosen[i]) rest.push_back(i);
            pick = rest[rng.next_index(rest.size())];
        }
        chosen[pick] = true;
        picks.push_back(pick);
    }

    std::vector<std::vector<double>> centroids;
    centroids.reserve(picks.size());
    for (const std::size_t i : picks) centroids.push_back(segments[i].values);
    return centroids;
}

// Assign every segment to its nearest centroid (ties -> lowest index), then
// repair empty clusters by promoting the segment farthest from its centroid,
// taken from a cluster that keeps at least one member. Returns total squared
// distance.
double assign_segments(const SegmentSet& segments,
                       std::vector<Barycenter>& centroids, const DtwParams& params,
                       std::vector<int>& assignments, std::vector<int>& counts) {
    const int k = static_cast<int>(centroids.size());
    assignments.assign(segments.size(), 0);
    counts.assign(static_cast<std::size_t>(k), 0);
    std::vector<double> dist(segments.size(), 0.0);

    for (std::size_t i = 0; i < segments.size(); ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            const double d = dtw_distance(segments[i].values, centroids[c].values, params);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        assignments[i] = best;
        dist[i] = best_d;
        ++counts[best];
    }

    for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        std::size_t far = segments.size();
        double far_d = -1.0;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (counts[assignments[i]] <= 1) continue;
            if (dist[i] > far_d) {
                far_d = dist[i];
                far = i;
            }
        }
        if (far == segments.size())
            throw std::runtime_error("fit: cannot repair empty cluster");
        --counts[assignments[far]];
        assignments[far] = c;
        counts[c] = 1;
        centroids[static_cast<std::size_t>(c)] = Barycenter{segments[far].values, 0.0, 0, {}};
        dist[far] = 0.0;
    }

    double inertia = 0.0;
    for (const double d : dist) inertia += d * d;
    return inertia;
}

ClusterModel lloyd(const SegmentSet& segments,
                   std::vector<std::vector<double>> initial_centroids,
                   const DtwParams& params, int max_iter, std::uint64_t seed,
                   int dba_max_iter, double dba_tol) {
    const int k = static_cast<int>(initial_centroids.size());
    ClusterModel model;
    model.k = k;
    model.n = static_cast<int>(segments.front().values.size());
    model.seed = seed;
    model.params = params;
    model.centroids.resize(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
        auto& values = initial_centroids[static_cast<std::size_t>(c)];
        if (values.size() != static_cast<std::size_t>(model.n))
            throw std::invalid_argument("fit: centroid length differs from segments");
        model.centroids[static_cast<std::size_t>(c)].values = std::move(values);
    }

    std::vector<int> prev;
    bool converged = false;
    for (int iter = 1; iter <= max_iter; ++iter) {
        std::vector<int> assignments, counts;
        model.inertia =
            assign_segments(segments, model.centroids, params, assignments, counts);
        model.inertia_history.push_back(model.inertia);
        model.assignments = assignments;
        model.sizes = counts;
        model.iterations_run = iter;
        if (assignments == prev) {
            converged = true;
            break;
        }
        prev = std::move(assignments);

        for (int c = 0; c < k; ++c) {
            std::vector<std::vector<double>> members;
            for (std::size_t i = 0; i < segments.size(); ++i)
                if (model.assignments[i] == c) members.push_back(segments[i].values);
            model.centroids[static_cast<std::size_t>(c)] =
                dba_average(members, model.centroids[static_cast<std::size_t>(c)].values,
                            dba_max_iter, dba_tol, params);
        }
    }

    if (!converged) {
        // ran out of iterations right after a centroid update; sync the stored
        // assignments and inertia with the final centroids
        std::vector<int> assignments, counts;
        model.inertia =
            assign_segments(segments, model.centroids, params, assignments, counts);
        model.inertia_history.push_back(model.inertia);
        model.assignments = std::move(assignments);
        model.sizes = std::move(counts);
    }
    return model;
}

}  // namespace

ClusterModel fit(const SegmentSet& segments, int k, const DtwParams& params,
                 int max_iter, std::uint64_t seed, int dba_max_iter, double dba_tol,
                 int restarts) {
    check_segments(segments, k);
    if (max_iter < 1) throw std::invalid_argument("fit: max_iter must be >= 1");
    if (restarts < 1) throw std::invalid_argument("fit: restarts must be >= 1");
    // Lloyd only descends within one init's basin; restarting from several
    // seedings and keeping the lowest final inertia escapes merged-cluster
    // optima. First start wins ties, so results stay reproducible.
    ClusterModel best;
    for (int r = 0; r < restarts; ++r) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
        auto centroids = seed_centroids(segments, k, params, rng);
        auto model = lloyd(segments, std::move(centroids), params, max_iter, seed,
                           dba_max_iter, dba_tol);
        if (r == 0 || model.inertia < best.inertia) best = std::move(model);
    }
    return best;
}

ClusterModel fit_from_centroids(const SegmentSet& segments,
                                std::vector<std::vector<double>> initial_centroids,
                                const DtwParams& params, int max_iter,
                                int dba_max_iter, double dba_tol) {
    check_segments(segments, static_cast<int>(initial_centroids.size()));
    if (max_iter < 1) throw std::invalid_argument("fit: max_iter must be >= 1");
    return lloyd(segments, std::move(initial_centroids), params, max_iter, /*seed=*/0,
                 dba_max_iter, dba_tol);
}

std::pair<int, double> predict_cluster(const ClusterModel& model,
                                       std::span<const double> window,
                                       const DtwParams& params) {
    if (model.centroids.empty())
        throw std::invalid_argument("predict_cluster: model has no centroids");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < model.centroids.size(); ++c) {
        const double d = dtw_distance(window, model.centroids[c].values, params);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return {best, best_d};
}

std::vector<int> cluster_sizes(const ClusterModel& model) {
    if (model.assignments.empty()) return model.sizes;
    std::vector<int> counts(static_cast<std::size_t>(model.k), 0);
    for (const int a : model.assignments) {
        if (a < 0 || a >= model.k)
            throw std::invalid_argument("cluster_sizes: assignment out of range");
        ++counts[static_cast<std::size_t>(a)];
    }
    return counts;
}

std::string cluster_model_to_json(const ClusterModel& model) {
    nlohmann::json j;
    j["k"] = model.k;
    j["n"] = model.n;
    j["seed"] = model.seed;
    j["inertia"] = model.inertia;
    j["sizes"] = cluster_sizes(model);
    auto centroids = nlohmann::json::array();
    for (const auto& c : model.centroids) centroids.push_back(c.values);
    j["centroids"] = std::move(centroids);
    j["dtw_params"]["q"] = model.params.q;
    if (model.params.band)
        j["dtw_params"]["band"] = *model.params.band;
    else
        j["dtw_params"]["band"] = nullptr;
    return j.dump(2);
}

ClusterModel cluster_model_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ClusterModel model;
    model.k = j.at("k").get<int>();
    model.n = j.at("n").get<int>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.inertia = j.at("inertia").get<double>();
    model.sizes = j.at("sizes").get<std::vector<int>>();
    for (const auto& values : j.at("centroids")) {
        Barycenter b;
        b.values = values.get<std::vector<double>>();
        model.centroids.push_back(std::move(b));
    }
    if (static_cast<int>(model.centroids.size()) != model.k)
        throw std::invalid_argument("cluster model: centroid count differs from k");
    model.params.q = j.at("dtw_params").at("q").get<double>();
    const auto& band = j.at("dtw_params").at("band");
    if (!band.is_null()) model.params.band = band.get<int>();
    return model;
}

}  // namespace cellcast
