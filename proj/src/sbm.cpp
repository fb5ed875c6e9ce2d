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

#include <sgf/sbm.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace sgf {
namespace {

// Distance to the next success of a Bernoulli(p) sequence, counting from the
// current position (0 means the very next pair).
std::uint64_t geometric_skip(std::mt19937_64& rng, double log_q) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    while (u <= 0.0) {
        u = unif(rng);
    }
    return static_cast<std::uint64_t>(std::floor(std::log(u) / log_q));
}

// Bernoulli(p) over pairs i < j of `members`.
void sample_within(const std::vector<NodeId>& members, double p, std::mt19937_64& rng,
                   std::vector<Edge>& out) {
    const auto s = static_cast<std::int64_t>(members.size());
    if (p <= 0.0 || s < 2) {
        return;
    }
    if (p >= 1.0) {
        for (std::int64_t i = 0; i < s; ++i) {
            for (std::int64_t j = 0; j < i; ++j) {
                out.push_back({members[i], members[j], 1.0});
            }
        }
        return;
    }
    const double log_q = std::log1p(-p);
    std::int64_t v = 1;
    std::int64_t w = -1;
    while (v < s) {
        w += 1 + static_cast<std::int64_t>(geometric_skip(rng, log_q));
        while (w >= v && v < s) {
            w -= v;
            ++v;
        }
        if (v < s) {
            out.push_back({members[v], members[w], 1.0});
        }
    }
}

// Bernoulli(p) over the product a x b.
void sample_between(const std::vector<NodeId>& a, const std::vector<NodeId>& b, double p,
                    std::mt19937_64& rng, std::vector<Edge>& out) {
    const std::uint64_t total = static_cast<std::uint64_t>(a.size()) * b.size();
    if (p <= 0.0 || total == 0) {
        return;
    }
    if (p >= 1.0) {
        for (NodeId u : a) {
            for (NodeId v : b) {
                out.push_back({u, v, 1.0});
            }
        }
        return;
    }
    const double log_q = std::log1p(-p);
    std::uint64_t idx = geometric_skip(rng, log_q);
    while (idx < total) {
        out.push_back({a[idx / b.size()], b[idx % b.size()], 1.0});
        idx += 1 + geometric_skip(rng, log_q);
    }
}

} // namespace

NodeDataset generate_sbm(const SbmOptions& o) {
    if (!(o.p_out >= 0.0 && o.p_out <= o.p_in && o.p_in <= 1.0)) {
        throw ConfigError("generate_sbm: need 0 <= p_out <= p_in <= 1");
    }
    if (!(o.sep >= 0.0)) {
        throw ConfigError("generate_sbm: sep must be >= 0");
    }
    if (o.nodes == 0 || o.classes == 0) {
        throw ConfigError("generate_sbm: nodes and classes must be positive");
    }
    if (o.feat_dim < o.classes) {
        throw ConfigError("generate_sbm: feat_dim must be at least the number of classes");
    }
    if (o.train_frac < 0.0 || o.valid_frac < 0.0 || o.train_frac + o.valid_frac > 1.0) {
        throw ConfigError("generate_sbm: invalid split fractions");
    }

    std::mt19937_64 rng(o.seed);
    const std::size_t n = o.nodes;

    NodeDataset ds;
    ds.labels.task = Task::Multiclass;
    ds.labels.num_outputs = o.classes;
    ds.labels.classes.resize(n);
    for (std::size_t u = 0; u < n; ++u) {
        ds.labels.classes[u] = static_cast<std::int32_t>(u % o.classes);
    }
    std::shuffle(ds.labels.classes.begin(), ds.labels.classes.end(), rng);

    std::vector<std::vector<NodeId>> members(o.classes);
    for (std::size_t u = 0; u < n; ++u) {
        members[static_cast<std::size_t>(ds.labels.classes[u])].push_back(static_cast<NodeId>(u));
    }
    std::vector<Edge> edges;
    for (std::size_t a = 0; a < o.classes; ++a) {
        sample_within(members[a], o.p_in, rng, edges);
        for (std::size_t b = a + 1; b < o.classes; ++b) {
            sample_between(members[a], members[b], o.p_out, rng, edges);
        }
    }
    ds.graph = SparseGraph::from_edges(n, edges);

    ds.features = Matrix<float>(n, o.feat_dim);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t c = 0; c < o.feat_dim; ++c) {
            ds.features(u, c) = static_cast<float>(noise(rng));
        }
        ds.features(u, static_cast<std::size_t>(ds.labels.classes[u])) +=
            static_cast<float>(o.sep);
    }

    std::vector<NodeId> order(n);
    for (std::size_t u = 0; u < n; ++u) {
        order[u] = static_cast<NodeId>(u);
    }
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(o.train_frac * static_cast<double>(n)));
    const auto n_valid = static_cast<std::size_t>(std::llround(o.valid_frac * static_cast<double>(n)));
    ds.split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    ds.split.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train + n_valid)));
    ds.split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train + n_valid)),
                         order.end());
    std::sort(ds.split.train.begin(), ds.split.train.end());
    std::sort(ds.split.valid.begin(), ds.split.valid.end());
    std::sort(ds.split.test.begin(), ds.split.test.end());

    ds.validate();
    return ds;
}

SparseGraph random_graph(std::size_t n, double avg_degree, std::uint64_t seed) {
    if (n < 2 || avg_degree < 0.0) {
        throw ConfigError("random_graph: need n >= 2 and avg_degree >= 0");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
    const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * avg_degree / 2.0));
    std::vector<Edge> edges;
    edges.reserve(m);
    while (edges.size() < m) {
        const NodeId u = pick(rng);
        const NodeId v = pick(rng);
        if (u != v) {
            edges.push_back({u, v, 1.0});
        }
    }
    return SparseGraph::from_edges(n, edges);
}

} // namespace sgf
