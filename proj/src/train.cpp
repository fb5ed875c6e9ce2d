/*
 * Copyright 2026 The sgformer-cpp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <sgf/alloc_stats.hpp>
#include <sgf/error.hpp>
#include <sgf/train.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace sgf {

using json = nlohmann::ordered_json;

std::string to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

Precision precision_from_string(const std::string& s) {
    if (s == "f32") {
        return Precision::F32;
    }
    if (s == "f64") {
        return Precision::F64;
    }
    throw ConfigError("precision must be f32 or f64, got '" + s + "'");
}

void RunConfig::validate() const {
    if (!(lr > 0.0 && std::isfinite(lr))) {
        throw ConfigError("lr must be positive");
    }
    if (!(weight_decay >= 0.0 && std::isfinite(weight_decay))) {
        throw ConfigError("weight_decay must be >= 0");
    }
    if (epochs < 1) {
        throw ConfigError("epochs must be >= 1");
    }
    if (hidden < 1) {
        throw ConfigError("hidden must be >= 1");
    }
    if (gcn_depth < 1 || gcn_depth > 3) {
        throw ConfigError("gcn_depth must be 1, 2 or 3");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("alpha must be in [0, 1]");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ConfigError("dropout must be in [0, 1)");
    }
}

ModelConfig RunConfig::model_config(const NodeDataset& ds) const {
    ModelConfig m;
    m.in_dim = ds.num_features();
    m.hidden = hidden;
    m.out_dim = ds.labels.num_outputs;
    m.gcn_depth = gcn_depth;
    m.alpha = alpha;
    m.dropout = dropout;
    m.attn_bias = attn_bias;
    m.gcn_bias = gcn_bias;
    m.task = ds.labels.task;
    m.validate();
    return m;
}

template <typename T>
void adam_step(std::span<Matrix<T>* const> params, std::span<const Matrix<T>> grads,
               AdamState& state, double lr, double weight_decay) {
    if (params.size() != grads.size()) {
        throw ShapeError("adam: parameter and gradient counts differ");
    }
    if (state.m.empty()) {
        for (const Matrix<T>* p : params) {
            state.m.emplace_back(p->rows(), p->cols());
            state.v.emplace_back(p->rows(), p->cols());
        }
    }
    if (state.m.size() != params.size()) {
        throw ShapeError("adam: state does not match parameters");
    }
    ++state.step;
    const double step = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(kAdamBeta1, step);
    const double c2 = 1.0 - std::pow(kAdamBeta2, step);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix<T>& p = *params[i];
        const Matrix<T>& g = grads[i];
        Matrix<double>& m = state.m[i];
        Matrix<double>& v = state.v[i];
        if (!p.same_shape(g) || p.rows() != m.rows() || p.cols() != m.cols()) {
            throw ShapeError("adam: shape mismatch for parameter " + std::to_string(i));
        }
        T* pd = p.data();
        const T* gd = g.data();
        double* md = m.data();
        double* vd = v.data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            double x = static_cast<double>(pd[j]);
            const double gj = static_cast<double>(gd[j]);
            x -= lr * weight_decay * x;
            md[j] = kAdamBeta1 * md[j] + (1.0 - kAdamBeta1) * gj;
            vd[j] = kAdamBeta2 * vd[j] + (1.0 - kAdamBeta2) * gj * gj;
            x -= lr * (md[j] / c1) / (std::sqrt(vd[j] / c2) + kAdamEps);
            pd[j] = static_cast<T>(x);
        }
    }
}

template <typename T>
double accuracy(const Matrix<T>& logits, std::span<const std::int32_t> classes,
                std::span<const NodeId> mask) {
    if (mask.empty()) {
        throw ConfigError("evaluate: empty node mask");
    }
    std::size_t hit = 0;
    for (NodeId u : mask) {
        const auto row = logits.row(static_cast<std::size_t>(u));
        const auto best = std::max_element(row.begin(), row.end()) - row.begin();
        hit += best == classes[static_cast<std::size_t>(u)];
    }
    return static_cast<double>(hit) / static_cast<double>(mask.size());
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("roc_auc: scores and labels differ in length");
    }
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] != 0) {
                pos_rank_sum += avg_rank;
                ++pos;
            }
        }
        i = j;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) {
        throw DataError("roc_auc: need both classes present");
    }
    const double p = static_cast<double>(pos);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

template <typename T>
double evaluate(const Matrix<T>& logits, const Labels& labels, std::span<const NodeId> mask) {
    if (mask.empty()) {
        throw ConfigError("evaluate: empty node mask");
    }
    if (labels.task == Task::Multiclass) {
        return accuracy(logits, labels.classes, mask);
    }
    double total = 0.0;
    std::size_t used = 0;
    std::vector<double> s(mask.size());
    std::vector<int> y(mask.size());
    for (std::size_t c = 0; c < logits.cols(); ++c) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            const auto u = static_cast<std::size_t>(mask[i]);
            s[i] = static_cast<double>(logits(u, c));
            y[i] = labels.binary(u, c) != 0.0f;
            pos += static_cast<std::size_t>(y[i]);
        }
        if (pos == 0 || pos == mask.size()) {
            continue;
        }
        total += roc_auc(s, y);
        ++used;
    }
    if (used == 0) {
        throw DataError("evaluate: no label column has both classes in the mask");
    }
    return total / static_cast<double>(used);
}

namespace {

// Per-batch training inputs with node ids relabeled to batch positions.
struct BatchView {
    SparseGraph graph;
    std::vector<NodeId> train_rows;
    std::vector<std::int32_t> classes;
    Matrix<float> binary;
};

template <typename T>
double batch_loss_step(ad::Tape<T>& t, SgformerParams<T>& params, const SparseGraph& g,
                       const Matrix<T>& x, const Labels& labels,
                       std::span<const std::int32_t> classes, const Matrix<float>& binary,
                       std::span<const NodeId> rows, const ForwardOptions& fo,
                       std::mt19937_64& rng, AdamState& adam, const RunConfig& cfg) {
    const auto fv = forward(t, params, g, x, fo, &rng, true);
    const ad::Var loss = labels.task == Task::Multiclass
                             ? ad::softmax_cross_entropy(t, fv.logits, classes, rows)
                             : ad::sigmoid_bce(t, fv.logits, binary, rows);
    const double lv = static_cast<double>(t.value(loss)(0, 0));
    if (!std::isfinite(lv)) {
        throw NumericError("training loss is not finite");
    }
    const auto grads = t.backward(loss, fv.params);
    const auto ptrs = params.tensors();
    adam_step<T>(ptrs, grads, adam, cfg.lr, cfg.weight_decay);
    return lv;
}

} // namespace

template <typename T>
TrainResult<T> train(const NodeDataset& ds, const RunConfig& cfg, const EpochCallback& on_epoch,
                     bool timing) {
    using clock = std::chrono::steady_clock;
    cfg.validate();
    ds.validate();
    if (ds.split.train.empty() || ds.split.valid.empty() || ds.split.test.empty()) {
        throw DataError("train: train, valid and test splits must all be nonempty");
    }
    AllocStats::reset_peak();

    TrainResult<T> res;
    SgformerParams<T> params = init_params<T>(cfg.model_config(ds), cfg.seed);
    res.params = params;
    // Dropout and shuffling draw from separate streams so the partition
    // never perturbs the dropout masks.
    std::mt19937_64 drop_rng(cfg.seed);
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    const std::size_t n = ds.num_nodes();
    const SparseGraph full_g = normalize_gcn(ds.graph);
    const Matrix<T> full_x = Matrix<T>::cast_from(ds.features);
    std::vector<NodeId> full_train = ds.split.train;
    std::sort(full_train.begin(), full_train.end());
    std::vector<char> is_train(n, 0);
    for (NodeId u : full_train) {
        is_train[static_cast<std::size_t>(u)] = 1;
    }

    ForwardOptions fo;
    fo.training = true;
    fo.attention.scale = cfg.attention_scale;
    AdamState adam;
    ad::Tape<T> tape;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = clock::now();
        double loss_sum = 0.0;
        std::size_t steps = 0;

        std::vector<std::vector<NodeId>> batches;
        if (cfg.batch_size == 0) {
            batches.emplace_back(); // marker for the whole graph
        } else {
            batches = random_partition(n, cfg.batch_size, shuffle_rng);
        }
        for (const auto& batch : batches) {
            if (batch.empty() || batch.size() == n) {
                loss_sum += batch_loss_step(tape, params, full_g, full_x, ds.labels,
                                            ds.labels.classes, ds.labels.binary, full_train, fo,
                                            drop_rng, adam, cfg);
                ++steps;
                continue;
            }
            BatchView b;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                if (is_train[static_cast<std::size_t>(batch[i])]) {
                    b.train_rows.push_back(static_cast<NodeId>(i));
                }
            }
            if (b.train_rows.empty()) {
                ++res.metrics.skipped_batches;
                continue;
            }
            b.graph = normalize_gcn(induced_subgraph(ds.graph, batch));
            if (ds.labels.task == Task::Multiclass) {
                for (NodeId u : batch) {
                    b.classes.push_back(ds.labels.classes[static_cast<std::size_t>(u)]);
                }
            } else {
                b.binary = gather_rows(ds.labels.binary, batch);
            }
            const Matrix<T> x = Matrix<T>::cast_from(gather_rows(ds.features, batch));
            loss_sum += batch_loss_step(tape, params, b.graph, x, ds.labels, b.classes,
                                        b.binary, b.train_rows, fo, drop_rng, adam, cfg);
            ++steps;
        }
        if (steps == 0) {
            throw DataError("train: no batch contains a training node");
        }

        const Matrix<T> logits = predict(params, full_g, full_x, fo);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = loss_sum / static_cast<double>(steps);
        rec.train = evaluate(logits, ds.labels, ds.split.train);
        rec.valid = evaluate(logits, ds.labels, ds.split.valid);
        rec.test = evaluate(logits, ds.labels, ds.split.test);
        rec.ms = timing ? std::chrono::duration<double, std::milli>(clock::now() - t0).count()
                        : 0.0;
        res.metrics.epochs.push_back(rec);
        if (on_epoch) {
            on_epoch(rec);
        }
        if (epoch == 1 || rec.valid > res.metrics.best_valid) {
            res.metrics.best_epoch = epoch;
            res.metrics.best_valid = rec.valid;
            res.metrics.best_test = rec.test;
            res.params = params;
        }
        if (cfg.patience > 0 && epoch - res.metrics.best_epoch >= cfg.patience) {
            break;
        }
    }
    res.metrics.peak_bytes = AllocStats::peak_bytes();
    return res;
}

std::size_t GridSpec::size() const noexcept {
    return lr.size() * weight_decay.size() * hidden.size() * dropout.size() * alpha.size();
}

GridResult grid_search(const NodeDataset& ds, const RunConfig& base, const GridSpec& grid,
                       const std::function<void(const RunConfig&, const Metrics&)>& on_run) {
    if (grid.size() == 0) {
        throw ConfigError("grid_search: empty grid");
    }
    GridResult out;
    bool have = false;
    for (double lr : grid.lr) {
        for (double wd : grid.weight_decay) {
            for (std::size_t h : grid.hidden) {
                for (double dp : grid.dropout) {
                    for (double a : grid.alpha) {
                        RunConfig c = base;
                        c.lr = lr;
                        c.weight_decay = wd;
                        c.hidden = h;
                        c.dropout = dp;
                        c.alpha = a;
                        const Metrics m = c.precision == Precision::F32
                                              ? train<float>(ds, c, {}, false).metrics
                                              : train<double>(ds, c, {}, false).metrics;
                        ++out.runs;
                        if (on_run) {
                            on_run(c, m);
                        }
                        if (!have || m.best_valid > out.best_metrics.best_valid) {
                            out.best = c;
                            out.best_metrics = m;
                            have = true;
                        }
                    }
                }
            }
        }
    }
    return out;
}

std::string epoch_json(const EpochRecord& r) {
    json j;
    j["epoch"] = r.epoch;
    j["loss"] = r.loss;
    j["train"] = r.train;
    j["valid"] = r.valid;
    j["test"] = r.test;
    j["ms"] = r.ms;
    return j.dump();
}

std::string run_config_json(const RunConfig& c) {
    json j;
    j["lr"] = c.lr;
    j["weight_decay"] = c.weight_decay;
    j["dropout"] = c.dropout;
    j["hidden"] = c.hidden;
    j["gcn_depth"] = c.gcn_depth;
    j["alpha"] = c.alpha;
    j["epochs"] = c.epochs;
    if (c.batch_size == 0) {
        j["batch_size"] = "FULL";
    } else {
        j["batch_size"] = c.batch_size;
    }
    j["seed"] = c.seed;
    j["precision"] = to_string(c.precision);
    j["patience"] = c.patience;
    j["attn_bias"] = c.attn_bias;
    j["gcn_bias"] = c.gcn_bias;
    return j.dump();
}

std::string summary_json(const Metrics& m, const std::string& config_json) {
    json j;
    j["summary"] = true;
    j["epochs"] = m.epochs.size();
    j["best_epoch"] = m.best_epoch;
    j["best_valid"] = m.best_valid;
    j["best_test"] = m.best_test;
    j["peak_bytes"] = m.peak_bytes;
    j["skipped_batches"] = m.skipped_batches;
    j["config"] = json::parse(config_json);
    return j.dump();
}

#define SGF_INSTANTIATE(T)                                                                     \
    template void adam_step(std::span<Matrix<T>* const>, std::span<const Matrix<T>>,          \
                            AdamState&, double, double);                                       \
    template double accuracy(const Matrix<T>&, std::span<const std::int32_t>,                  \
                             std::span<const NodeId>);                                         \
    template double evaluate(const Matrix<T>&, const Labels&, std::span<const NodeId>);        \
    template TrainResult<T> train(const NodeDataset&, const RunConfig&, const EpochCallback&, \
                                  bool);

SGF_INSTANTIATE(float)
SGF_INSTANTIATE(double)

#undef SGF_INSTANTIATE

} // namespace sgf
