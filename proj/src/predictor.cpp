#include "cellcast/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "cellcast/rng.hpp"

namespace cellcast {

std::string to_string(PredictorKind kind) {
    return kind == PredictorKind::lstm ? "lstm" : "seasonal_naive";
}

PredictorKind predictor_kind_from_string(const std::string& s) {
    if (s == "lstm") return PredictorKind::lstm;
    if (s == "seasonal_naive") return PredictorKind::seasonal_naive;
    throw std::invalid_argument("unknown predictor kind: " + s);
}

std::size_t lstm_parameter_count(int features, int hidden) {
    const std::size_t f = static_cast<std::size_t>(features);
    const std::size_t h = static_cast<std::size_t>(hidden);
    return 4 * (h * f + h * h + h) + h + 1;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double sign_of(double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); }

// offsets into the flat parameter vector; gate order input, forget, cell,
// output, each block laid out W (h x f), U (h x h), b (h), then dense w + b
struct Layout {
    int f = 0, h = 0;
    std::size_t stride = 0;  // one gate block

    Layout(int features, int hidden)
        : f(features), h(hidden),
          stride(static_cast<std::size_t>(hidden) *
                     (static_cast<std::size_t>(features) + hidden) +
                 static_cast<std::size_t>(hidden)) {}

    std::size_t W(int gate) const { return static_cast<std::size_t>(gate) * stride; }
    std::size_t U(int gate) const {
        return W(gate) + static_cast<std::size_t>(h) * static_cast<std::size_t>(f);
    }
    std::size_t b(int gate) const {
        return U(gate) + static_cast<std::size_t>(h) * static_cast<std::size_t>(h);
    }
    std::size_t dense_w() const { return 4 * stride; }
    std::size_t dense_b() const { return 4 * stride + static_cast<std::size_t>(h); }
    std::size_t total() const { return dense_b() + 1; }
};

// per-step activations kept for backpropagation; all arrays are n x h
struct Cache {
    std::vector<double> i, f, g, o, c, tanh_c, h;

    void resize(int steps, int hidden) {
        const std::size_t sz =
            static_cast<std::size_t>(steps) * static_cast<std::size_t>(hidden);
        i.assign(sz, 0.0);
        f.assign(sz, 0.0);
        g.assign(sz, 0.0);
        o.assign(sz, 0.0);
        c.assign(sz, 0.0);
        tanh_c.assign(sz, 0.0);
        h.assign(sz, 0.0);
    }
};

double lstm_forward(const double* p, const Layout& lay,
                    const std::vector<std::vector<double>>& input, Cache* cache) {
    const int n = static_cast<int>(input.size());
    const int h = lay.h, f = lay.f;
    if (cache) cache->resize(n, h);

    std::vector<double> h_prev(static_cast<std::size_t>(h), 0.0);
    std::vector<double> h_new(static_cast<std::size_t>(h), 0.0);
    std::vector<double> c_prev(static_cast<std::size_t>(h), 0.0);
    std::vector<double> act(4);

    for (int t = 0; t < n; ++t) {
        const double* x = input[static_cast<std::size_t>(t)].data();
        const std::size_t row = static_cast<std::size_t>(t) * static_cast<std::size_t>(h);
        for (int u = 0; u < h; ++u) {
            for (int gate = 0; gate < 4; ++gate) {
                const double* W = p + lay.W(gate) + static_cast<std::size_t>(u) * f;
                const double* U = p + lay.U(gate) + static_cast<std::size_t>(u) * h;
                double a = p[lay.b(gate) + static_cast<std::size_t>(u)];
                for (int j = 0; j < f; ++j) a += W[j] * x[j];
                for (int v = 0; v < h; ++v) a += U[v] * h_prev[static_cast<std::size_t>(v)];
                act[static_cast<std::size_t>(gate)] = a;
            }
            const double gi = sigmoid(act[0]);
            const double gf = sigmoid(act[1]);
            const double gg = std::tanh(act[2]);
            const double go = sigmoid(act[3]);
            const double cc = gf * c_prev[static_cast<std::size_t>(u)] + gi * gg;
            const double tc = std::tanh(cc);
            const double hh = go * tc;
            if (cache) {
                cache->i[row + static_cast<std::size_t>(u)] = gi;
                cache->f[row + static_cast<std::size_t>(u)] = gf;
                cache->g[row + static_cast<std::size_t>(u)] = gg;
                cache->o[row + static_cast<std::size_t>(u)] = go;
                cache->c[row + static_cast<std::size_t>(u)] = cc;
                cache->tanh_c[row + static_cast<std::size_t>(u)] = tc;
                cache->h[row + static_cast<std::size_t>(u)] = hh;
            }
            c_prev[static_cast<std::size_t>(u)] = cc;  // only unit u reads its own cell
            h_new[static_cast<std::size_t>(u)] = hh;   // h_prev must stay intact this step
        }
        std::swap(h_prev, h_new);
    }

    double y = p[lay.dense_b()];
    const double* w = p + lay.dense_w();
    for (int u = 0; u < h; ++u) y += w[u] * h_prev[static_cast<std::size_t>(u)];
    return y;
}

// accumulates dLoss/dparams into grad, where dLoss/dprediction == dy
void lstm_backward(const double* p, const Layout& lay,
                   const std::vector<std::vector<double>>& input, const Cache& cache,
                   double dy, double* grad) {
    const int n = static_cast<int>(input.size());
    const int h = lay.h, f = lay.f;

    std::vector<double> dh(static_cast<std::size_t>(h), 0.0);
    std::vector<double> dh_next(static_cast<std::size_t>(h), 0.0);
    std::vector<double> dc(static_cast<std::size_t>(h), 0.0);
    std::vector<double> da(4ul * static_cast<std::size_t>(h), 0.0);

    const std::size_t last = static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(h);
    grad[lay.dense_b()] += dy;
    for (int u = 0; u < h; ++u) {
        grad[lay.dense_w() + static_cast<std::size_t>(u)] +=
            dy * cache.h[last + static_cast<std::size_t>(u)];
        dh[static_cast<std::size_t>(u)] = dy * p[lay.dense_w() + static_cast<std::size_t>(u)];
    }

    for (int t = n - 1; t >= 0; --t) {
        const std::size_t row = static_cast<std::size_t>(t) * static_cast<std::size_t>(h);
        const std::size_t prev_row = t > 0 ? row - static_cast<std::size_t>(h) : 0;
        const double* x = input[static_cast<std::size_t>(t)].data();
        for (int u = 0; u < h; ++u) {
            const std::size_t uu = static_cast<std::size_t>(u);
            const double gi = cache.i[row + uu], gf = cache.f[row + uu];
            const double gg = cache.g[row + uu], go = cache.o[row + uu];
            const double tc = cache.tanh_c[row + uu];
            const double c_old = t > 0 ? cache.c[prev_row + uu] : 0.0;

            const double d_o = dh[uu] * tc;
            const double d_c = dc[uu] + dh[uu] * go * (1.0 - tc * tc);
            const double d_i = d_c * gg;
            const double d_f = d_c * c_old;
            const double d_g = d_c * gi;

            da[0 * static_cast<std::size_t>(h) + uu] = d_i * gi * (1.0 - gi);
            da[1 * static_cast<std::size_t>(h) + uu] = d_f * gf * (1.0 - gf);
            da[2 * static_cast<std::size_t>(h) + uu] = d_g * (1.0 - gg * gg);
            da[3 * static_cast<std::size_t>(h) + uu] = d_o * go * (1.0 - go);
            dc[uu] = d_c * gf;
        }

        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        for (int gate = 0; gate < 4; ++gate) {
            const double* dag = da.data() + static_cast<std::size_t>(gate) * h;
            double* gW = grad + lay.W(gate);
            double* gU = grad + lay.U(gate);
            double* gb = grad + lay.b(gate);
            const double* U = p + lay.U(gate);
            for (int u = 0; u < h; ++u) {
                const double d = dag[u];
                if (d == 0.0) continue;
                double* gWrow = gW + static_cast<std::size_t>(u) * f;
                for (int j = 0; j < f; ++j) gWrow[j] += d * x[j];
                gb[u] += d;
                double* gUrow = gU + static_cast<std::size_t>(u) * h;
                const double* Urow = U + static_cast<std::size_t>(u) * h;
                if (t > 0) {
                    const double* h_old = cache.h.data() + prev_row;
                    for (int v = 0; v < h; ++v) gUrow[v] += d * h_old[v];
                }
                for (int v = 0; v < h; ++v)
                    dh_next[static_cast<std::size_t>(v)] += Urow[v] * d;
            }
        }
        std::swap(dh, dh_next);
    }
}

std::vector<double> init_parameters(const PredictorSpec& spec) {
    const Layout lay(spec.features.feature_count(), spec.hidden_size);
    Rng rng(spec.seed);
    const double scale =
        1.0 / std::sqrt(static_cast<double>(lay.f) + static_cast<double>(lay.h));
    std::vector<double> p(lay.total());
    for (auto& v : p) v = rng.uniform(-scale, scale);
    return p;
}

void check_spec(const PredictorSpec& spec) {
    if (spec.window < 1) throw std::invalid_argument("predictor: window must be >= 1");
    if (spec.horizon < 1) throw std::invalid_argument("predictor: horizon must be >= 1");
    if (spec.hidden_size < 1)
        throw std::invalid_argument("predictor: hidden_size must be >= 1");
    if (spec.features.feature_count() < 1)
        throw std::invalid_argument("predictor: no features configured");
}

void check_protocol(const TrainingProtocol& proto) {
    if (proto.epochs < 1 || proto.plateau_patience < 1 ||
        proto.early_stop_patience < 1 || proto.batch_size < 1)
        throw std::invalid_argument("training protocol: counts must be >= 1");
    if (proto.lr0 <= 0.0) throw std::invalid_argument("training protocol: lr0 must be > 0");
    if (proto.plateau_factor <= 0.0 || proto.plateau_factor >= 1.0)
        throw std::invalid_argument("training protocol: plateau_factor must be in (0,1)");
    if (proto.validation_fraction <= 0.0 || proto.validation_fraction >= 1.0)
        throw std::invalid_argument(
            "training protocol: validation_fraction must be in (0,1)");
}

void check_window_shape(const Window& w, const PredictorSpec& spec) {
    if (static_cast<int>(w.input.size()) != spec.window)
        throw std::invalid_argument("window has " + std::to_string(w.input.size()) +
                                    " rows, spec wants " + std::to_string(spec.window));
    const std::size_t f = static_cast<std::size_t>(spec.features.feature_count());
    for (const auto& row : w.input)
        if (row.size() != f)
            throw std::invalid_argument("window row has " + std::to_string(row.size()) +
                                        " features, spec wants " + std::to_string(f));
}

double val_mae(const double* p, const Layout& lay, const std::vector<Window>& windows) {
    double sum = 0.0;
    for (const auto& w : windows)
        sum += std::abs(lstm_forward(p, lay, w.input, nullptr) - w.target);
    return sum / static_cast<double>(windows.size());
}

}  // namespace

std::vector<Window> make_windows(const TimeSeries& series, const FeatureConfig& config,
                                 int n, int m) {
    if (n < 1 || m < 1) throw std::invalid_argument("make_windows: n and m must be >= 1");

    std::vector<const std::vector<double>*> columns;
    for (const auto& name : config.selected_channels)
        columns.push_back(&series.channel(name));
    if (config.peak_flag) columns.push_back(&series.channel(kPeakChannel));
    if (config.weekend_flag) columns.push_back(&series.channel(kWeekendChannel));
    const auto& output = series.output();

    std::vector<Window> windows;
    const std::size_t length = series.length();
    const std::size_t need = static_cast<std::size_t>(n) + static_cast<std::size_t>(m);
    if (length < need) return windows;

    const std::size_t count = length - need + 1;
    windows.reserve(count);
    for (std::size_t start = 0; start < count; ++start) {
        Window w;
        w.source_cell = series.cell_id;
        w.target_index = static_cast<int>(start) + n + m - 1;
        w.target = output[static_cast<std::size_t>(w.target_index)];
        w.input.resize(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) {
            auto& row = w.input[static_cast<std::size_t>(t)];
            row.resize(columns.size());
            for (std::size_t j = 0; j < columns.size(); ++j)
                row[j] = (*columns[j])[start + static_cast<std::size_t>(t)];
        }
        windows.push_back(std::move(w));
    }
    return windows;
}

double forward(const PredictorModel& model,
               const std::vector<std::vector<double>>& input) {
    const auto& spec = model.spec;
    if (static_cast<int>(input.size()) != spec.window)
        throw std::invalid_argument("forward: input has " +
                                    std::to_string(input.size()) + " rows, spec wants " +
                                    std::to_string(spec.window));
    const std::size_t f = static_cast<std::size_t>(spec.features.feature_count());
    for (const auto& row : input)
        if (row.size() != f)
            throw std::invalid_argument("forward: input row width " +
                                        std::to_string(row.size()) + ", spec wants " +
                                        std::to_string(f));

    if (spec.kind == PredictorKind::seasonal_naive) {
        if (spec.horizon > spec.window)
            throw std::invalid_argument(
                "seasonal_naive needs horizon <= window to reach back one season");
        return input[static_cast<std::size_t>(spec.horizon - 1)][0];
    }

    const Layout lay(spec.features.feature_count(), spec.hidden_size);
    if (model.parameters.size() != lay.total())
        throw std::invalid_argument("forward: parameter vector has " +
                                    std::to_string(model.parameters.size()) +
                                    " entries, spec wants " + std::to_string(lay.total()));
    return lstm_forward(model.parameters.data(), lay, input, nullptr);
}

PredictorModel train(const PredictorSpec& spec, const TrainingProtocol& protocol,
                     const std::vector<Window>& train_windows,
                     const std::vector<Window>& val_windows) {
    check_spec(spec);
    check_protocol(protocol);

    PredictorModel model;
    model.spec = spec;
    model.protocol = protocol;
    if (spec.kind == PredictorKind::seasonal_naive) {
        model.best_epoch = 0;  // the rule has nothing to fit
        return model;
    }

    if (train_windows.empty() || val_windows.empty())
        throw std::invalid_argument("train: need nonempty train and validation sets");
    for (const auto& w : train_windows) check_window_shape(w, spec);
    for (const auto& w : val_windows) check_window_shape(w, spec);

    const Layout lay(spec.features.feature_count(), spec.hidden_size);
    std::vector<double> params = init_parameters(spec);
    std::vector<double> best_params = params;
    std::vector<double> velocity(params.size(), 0.0);
    std::vector<double> grad(params.size(), 0.0);
    Cache cache;

    Rng shuffle_rng(mix_seed(spec.seed, 0x45504f43ULL));
    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), 0ul);

    double lr = protocol.lr0;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int plateau = 0, since_best = 0;

    for (int epoch = 1; epoch <= protocol.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double train_sum = 0.0;

        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(protocol.batch_size)) {
            const std::size_t end = std::min(
                order.size(), begin + static_cast<std::size_t>(protocol.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(end - begin);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t pos = begin; pos < end; ++pos) {
                const Window& w = train_windows[order[pos]];
                const double y = lstm_forward(params.data(), lay, w.input, &cache);
                const double r = y - w.target;
                train_sum += std::abs(r);
                const double dy = sign_of(r) * inv_batch;
                if (dy != 0.0)
                    lstm_backward(params.data(), lay, w.input, cache, dy, grad.data());
            }
            for (std::size_t j = 0; j < params.size(); ++j) {
                velocity[j] = protocol.momentum * velocity[j] - lr * grad[j];
                params[j] += velocity[j];
            }
        }

        const double train_loss = train_sum / static_cast<double>(train_windows.size());
        const double val_loss = val_mae(params.data(), lay, val_windows);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            char msg[128];
            std::snprintf(msg, sizeof(msg),
                          "training diverged at epoch %d (lr=%g): non-finite loss",
                          epoch, lr);
            throw std::runtime_error(msg);
        }
        model.train_history.push_back({train_loss, val_loss, lr});

        if (val_loss < best_val) {
            best_val = val_loss;
            best_params = params;
            best_epoch = epoch;
            plateau = 0;
            since_best = 0;
        } else {
            ++plateau;
            ++since_best;
            if (plateau >= protocol.plateau_patience) {
                lr = std::max(lr * protocol.plateau_factor, protocol.min_lr);
                plateau = 0;
            }
            if (since_best >= protocol.early_stop_patience) break;
        }
    }

    model.parameters = std::move(best_params);
    model.best_epoch = best_epoch;
    return model;
}

PredictorModel train_with_split(const PredictorSpec& spec,
                                const TrainingProtocol& protocol,
                                std::vector<Window> windows) {
    if (spec.kind == PredictorKind::seasonal_naive)
        return train(spec, protocol, {}, {});
    if (windows.size() < 2)
        throw std::invalid_argument("train_with_split: need at least 2 windows, have " +
                                    std::to_string(windows.size()));
    Rng rng(mix_seed(spec.seed, 0x53504c49ULL));
    rng.shuffle(windows);
    std::size_t val_count = static_cast<std::size_t>(
        std::lround(protocol.validation_fraction * static_cast<double>(windows.size())));
    val_count = std::clamp<std::size_t>(val_count, 1, windows.size() - 1);

    std::vector<Window> val(windows.end() - static_cast<long>(val_count), windows.end());
    windows.resize(windows.size() - val_count);
    return train(spec, protocol, windows, val);
}

double gradient_check(const PredictorSpec& spec,
                      const std::vector<std::vector<double>>& input, double target,
                      double epsilon) {
    check_spec(spec);
    if (spec.kind != PredictorKind::lstm)
        throw std::invalid_argument("gradient_check: only the lstm kind has gradients");
    if (epsilon <= 0.0) throw std::invalid_argument("gradient_check: epsilon must be > 0");
    if (static_cast<int>(input.size()) != spec.window)
        throw std::invalid_argument("gradient_check: input rows != spec window");

    const Layout lay(spec.features.feature_count(), spec.hidden_size);
    std::vector<double> params = init_parameters(spec);
    Cache cache;
    const double y = lstm_forward(params.data(), lay, input, &cache);
    if (std::abs(y - target) <= 10.0 * epsilon)
        throw std::runtime_error(
            "gradient_check: |prediction - target| = " + std::to_string(std::abs(y - target)) +
            " sits on the MAE kink; pick a fixture with a larger residual");

    std::vector<double> analytic(params.size(), 0.0);
    lstm_backward(params.data(), lay, input, cache, sign_of(y - target), analytic.data());

    double max_rel = 0.0;
    for (std::size_t j = 0; j < params.size(); ++j) {
        const double keep = params[j];
        params[j] = keep + epsilon;
        const double up = std::abs(lstm_forward(params.data(), lay, input, nullptr) - target);
        params[j] = keep - epsilon;
        const double down =
            std::abs(lstm_forward(params.data(), lay, input, nullptr) - target);
        params[j] = keep;
        const double fd = (up - down) / (2.0 * epsilon);
        const double rel = std::abs(analytic[j] - fd) /
                           std::max({std::abs(analytic[j]), std::abs(fd), 1e-4});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

ClusterTraining train_per_cluster(const ClusterModel& cluster_model,
                                  const std::vector<TimeSeries>& series_set,
                                  const PredictorSpec& spec,
                                  const TrainingProtocol& protocol) {
    check_spec(spec);
    if (cluster_model.centroids.empty())
        throw std::invalid_argument("train_per_cluster: cluster model has no centroids");
    if (series_set.empty())
        throw std::invalid_argument("train_per_cluster: empty series set");

    const int k = cluster_model.k;
    const int day_len = cluster_model.n;
    std::vector<std::vector<Window>> buckets(static_cast<std::size_t>(k));
    std::vector<Window> all_windows;

    for (const auto& series : series_set) {
        auto windows = make_windows(series, spec.features, spec.window, spec.horizon);
        SeasonalityConfig season;
        season.n = day_len;
        const auto days = segmentize(series, season).segments;
        std::vector<int> day_cluster(days.size());
        for (std::size_t d = 0; d < days.size(); ++d)
            day_cluster[d] =
                predict_cluster(cluster_model, days[d].values, cluster_model.params).first;

        for (auto& w : windows) {
            const std::size_t day = static_cast<std::size_t>(w.target_index / day_len);
            if (day >= days.size()) continue;  // target in a trailing partial day
            all_windows.push_back(w);
            buckets[static_cast<std::size_t>(day_cluster[day])].push_back(std::move(w));
        }
    }

    ClusterTraining result;
    result.window_counts.resize(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c)
        result.window_counts[static_cast<std::size_t>(c)] =
            static_cast<int>(buckets[static_cast<std::size_t>(c)].size());

    if (spec.kind == PredictorKind::seasonal_naive) {
        for (int c = 0; c < k; ++c) {
            PredictorModel m = train(spec, protocol, {}, {});
            m.cluster_id = c;
            result.models[c] = std::move(m);
        }
        return result;
    }

    std::vector<int> degenerate;
    for (int c = 0; c < k; ++c)
        if (result.window_counts[static_cast<std::size_t>(c)] < protocol.batch_size)
            degenerate.push_back(c);
    if (static_cast<int>(degenerate.size()) == k)
        throw std::runtime_error(
            "train_per_cluster: every cluster has fewer windows than one batch");

    PredictorModel global;
    if (!degenerate.empty()) {
        PredictorSpec global_spec = spec;
        global_spec.seed = mix_seed(spec.seed, 0);
        global = train_with_split(global_spec, protocol, all_windows);
        global.cluster_id = -1;
    }

    for (int c = 0; c < k; ++c) {
        if (std::find(degenerate.begin(), degenerate.end(), c) != degenerate.end()) {
            result.warnings.push_back(
                "cluster " + std::to_string(c) + " has " +
                std::to_string(result.window_counts[static_cast<std::size_t>(c)]) +
                " windows (< batch size " + std::to_string(protocol.batch_size) +
                "); using the global model");
            result.models[c] = global;
            continue;
        }
        PredictorSpec cluster_spec = spec;
        cluster_spec.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(c) + 1);
        PredictorModel m = train_with_split(cluster_spec, protocol,
                                            std::move(buckets[static_cast<std::size_t>(c)]));
        m.cluster_id = c;
        result.models[c] = std::move(m);
    }
    return result;
}

std::string predictor_model_to_json(const PredictorModel& model) {
    nlohmann::json j;
    j["cluster_id"] = model.cluster_id;
    j["parameters"] = model.parameters;

    nlohmann::json spec;
    spec["kind"] = to_string(model.spec.kind);
    spec["window"] = model.spec.window;
    spec["horizon"] = model.spec.horizon;
    spec["hidden_size"] = model.spec.hidden_size;
    spec["seed"] = model.spec.seed;
    spec["features"] = {{"variant", to_string(model.spec.features.variant)},
                        {"selected_channels", model.spec.features.selected_channels},
                        {"peak_flag", model.spec.features.peak_flag},
                        {"weekend_flag", model.spec.features.weekend_flag}};
    j["spec"] = std::move(spec);

    const auto& p = model.protocol;
    j["protocol"] = {{"epochs", p.epochs},
                     {"lr0", p.lr0},
                     {"momentum", p.momentum},
                     {"plateau_patience", p.plateau_patience},
                     {"plateau_factor", p.plateau_factor},
                     {"min_lr", p.min_lr},
                     {"early_stop_patience", p.early_stop_patience},
                     {"batch_size", p.batch_size},
                     {"validation_fraction", p.validation_fraction}};

    nlohmann::json history;
    std::vector<double> train_loss, val_loss, lr;
    for (const auto& e : model.train_history) {
        train_loss.push_back(e.train_loss);
        val_loss.push_back(e.val_loss);
        lr.push_back(e.lr);
    }
    history["train_loss"] = std::move(train_loss);
    history["val_loss"] = std::move(val_loss);
    history["lr"] = std::move(lr);
    history["best_epoch"] = model.best_epoch;
    j["train_history"] = std::move(history);
    return j.dump(2);
}

PredictorModel predictor_model_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    PredictorModel model;
    model.cluster_id = j.at("cluster_id").get<int>();
    model.parameters = j.at("parameters").get<std::vector<double>>();

    const auto& spec = j.at("spec");
    model.spec.kind = predictor_kind_from_string(spec.at("kind").get<std::string>());
    model.spec.window = spec.at("window").get<int>();
    model.spec.horizon = spec.at("horizon").get<int>();
    model.spec.hidden_size = spec.at("hidden_size").get<int>();
    model.spec.seed = spec.at("seed").get<std::uint64_t>();
    const auto& feat = spec.at("features");
    model.spec.features.variant =
        feature_variant_from_string(feat.at("variant").get<std::string>());
    model.spec.features.selected_channels =
        feat.at("selected_channels").get<std::vector<std::string>>();
    model.spec.features.peak_flag = feat.at("peak_flag").get<bool>();
    model.spec.features.weekend_flag = feat.at("weekend_flag").get<bool>();

    const auto& proto = j.at("protocol");
    model.protocol.epochs = proto.at("epochs").get<int>();
    model.protocol.lr0 = proto.at("lr0").get<double>();
    model.protocol.momentum = proto.at("momentum").get<double>();
    model.protocol.plateau_patience = proto.at("plateau_patience").get<int>();
    model.protocol.plateau_factor = proto.at("plateau_factor").get<double>();
    model.protocol.min_lr = proto.at("min_lr").get<double>();
    model.protocol.early_stop_patience = proto.at("early_stop_patience").get<int>();
    model.protocol.batch_size = proto.at("batch_size").get<int>();
    model.protocol.validation_fraction = proto.at("validation_fraction").get<double>();

    const auto& history = j.at("train_history");
    const auto train_loss = history.at("train_loss").get<std::vector<double>>();
    const auto val_loss = history.at("val_loss").get<std::vector<double>>();
    const auto lr = history.at("lr").get<std::vector<double>>();
    if (train_loss.size() != val_loss.size() || train_loss.size() != lr.size())
        throw std::invalid_argument("predictor model: ragged train_history");
    for (std::size_t e = 0; e < train_loss.size(); ++e)
        model.train_history.push_back({train_loss[e], val_loss[e], lr[e]});
    model.best_epoch = history.at("best_epoch").get<int>();

    if (model.spec.kind == PredictorKind::lstm &&
        model.parameters.size() !=
            lstm_parameter_count(model.spec.features.feature_count(),
                                 model.spec.hidden_size))
        throw std::invalid_argument("predictor model: parameter count mismatch");
    return model;
}

}  // namespace cellcast
