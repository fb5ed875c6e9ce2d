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

#include <sgf/graph.hpp>
#include <sgf/kernels.hpp>

#include "text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace sgf {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// SparseGraph

SparseGraph SparseGraph::from_edges(std::size_t num_nodes, std::span<const Edge> edges) {
    struct Entry {
        NodeId u;
        NodeId v;
        double w;
    };
    std::vector<Entry> entries;
    entries.reserve(edges.size() * 2);
    for (const Edge& e : edges) {
        if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= num_nodes ||
            static_cast<std::size_t>(e.dst) >= num_nodes) {
            throw DataError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                            ") out of range for " + std::to_string(num_nodes) + " nodes");
        }
        if (!std::isfinite(e.weight) || e.weight <= 0.0) {
            throw DataError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                            ") has non-positive or non-finite weight");
        }
        entries.push_back({e.src, e.dst, e.weight});
        if (e.src != e.dst) {
            entries.push_back({e.dst, e.src, e.weight});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.u != b.u ? a.u < b.u : a.v < b.v;
    });

    SparseGraph g;
    g.row_ptr_.assign(num_nodes + 1, 0);
    g.col_idx_.reserve(entries.size());
    g.edge_val_.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Entry& e = entries[i];
        if (i > 0 && entries[i - 1].u == e.u && entries[i - 1].v == e.v) {
            if (entries[i - 1].w != e.w) {
                throw DataError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                ") listed with contradictory weights");
            }
            continue;
        }
        g.col_idx_.push_back(e.v);
        g.edge_val_.push_back(e.w);
        ++g.row_ptr_[static_cast<std::size_t>(e.u) + 1];
    }
    std::partial_sum(g.row_ptr_.begin(), g.row_ptr_.end(), g.row_ptr_.begin());
    return g;
}

SparseGraph SparseGraph::from_csr(std::size_t num_nodes, std::vector<std::int64_t> row_ptr,
                                  std::vector<NodeId> col_idx, std::vector<double> edge_val) {
    if (row_ptr.size() != num_nodes + 1 || row_ptr.front() != 0 ||
        static_cast<std::size_t>(row_ptr.back()) != col_idx.size() ||
        col_idx.size() != edge_val.size()) {
        throw DataError("from_csr: inconsistent array lengths");
    }
    for (std::size_t u = 0; u < num_nodes; ++u) {
        if (row_ptr[u + 1] < row_ptr[u]) {
            throw DataError("from_csr: row_ptr decreases at row " + std::to_string(u));
        }
        for (auto i = row_ptr[u]; i < row_ptr[u + 1]; ++i) {
            const NodeId v = col_idx[static_cast<std::size_t>(i)];
            if (v < 0 || static_cast<std::size_t>(v) >= num_nodes) {
                throw DataError("from_csr: column out of range in row " + std::to_string(u));
            }
            if (i > row_ptr[u] && col_idx[static_cast<std::size_t>(i - 1)] >= v) {
                throw DataError("from_csr: columns not strictly increasing in row " +
                                std::to_string(u));
            }
        }
    }
    SparseGraph g;
    g.row_ptr_ = std::move(row_ptr);
    g.col_idx_ = std::move(col_idx);
    g.edge_val_ = std::move(edge_val);
    for (std::size_t u = 0; u < num_nodes; ++u) {
        const auto nb = g.neighbors(u);
        const auto ws = g.weights(u);
        for (std::size_t i = 0; i < nb.size(); ++i) {
            if (g.weight(static_cast<std::size_t>(nb[i]), u) != ws[i]) {
                throw DataError("from_csr: adjacency is not symmetric at (" + std::to_string(u) +
                                "," + std::to_string(nb[i]) + ")");
            }
        }
    }
    return g;
}

std::size_t SparseGraph::num_undirected_edges() const noexcept {
    std::size_t loops = 0;
    for (std::size_t u = 0; u < num_nodes(); ++u) {
        const auto nb = neighbors(u);
        loops += static_cast<std::size_t>(
            std::binary_search(nb.begin(), nb.end(), static_cast<NodeId>(u)));
    }
    return (num_entries() - loops) / 2 + loops;
}

double SparseGraph::weight(std::size_t u, std::size_t v) const noexcept {
    const auto nb = neighbors(u);
    const auto it = std::lower_bound(nb.begin(), nb.end(), static_cast<NodeId>(v));
    if (it == nb.end() || *it != static_cast<NodeId>(v)) {
        return 0.0;
    }
    return weights(u)[static_cast<std::size_t>(it - nb.begin())];
}

std::vector<Edge> SparseGraph::undirected_edges() const {
    std::vector<Edge> out;
    out.reserve(num_entries() / 2 + 1);
    for (std::size_t u = 0; u < num_nodes(); ++u) {
        const auto nb = neighbors(u);
        const auto ws = weights(u);
        for (std::size_t i = 0; i < nb.size(); ++i) {
            if (static_cast<std::size_t>(nb[i]) >= u) {
                out.push_back({static_cast<NodeId>(u), nb[i], ws[i]});
            }
        }
    }
    return out;
}

Matrix<double> SparseGraph::to_dense() const {
    Matrix<double> m(num_nodes(), num_nodes());
    for (std::size_t u = 0; u < num_nodes(); ++u) {
        const auto nb = neighbors(u);
        const auto ws = weights(u);
        for (std::size_t i = 0; i < nb.size(); ++i) {
            m(u, static_cast<std::size_t>(nb[i])) = ws[i];
        }
    }
    return m;
}

SparseGraph normalize_gcn(const SparseGraph& g) {
    const std::size_t n = g.num_nodes();
    std::vector<double> deg(n, 1.0);
    for (std::size_t u = 0; u < n; ++u) {
        for (double w : g.weights(u)) {
            deg[u] += w;
        }
    }
    std::vector<std::int64_t> row_ptr(n + 1, 0);
    std::vector<NodeId> cols;
    std::vector<double> vals;
    cols.reserve(g.num_entries() + n);
    vals.reserve(g.num_entries() + n);
    for (std::size_t u = 0; u < n; ++u) {
        const auto nb = g.neighbors(u);
        const auto ws = g.weights(u);
        bool diag_done = false;
        auto emit = [&](std::size_t v, double a) {
            cols.push_back(static_cast<NodeId>(v));
            vals.push_back(a / std::sqrt(deg[u] * deg[v]));
        };
        for (std::size_t i = 0; i < nb.size(); ++i) {
            const auto v = static_cast<std::size_t>(nb[i]);
            if (!diag_done && v >= u) {
                if (v == u) {
                    emit(u, ws[i] + 1.0);
                    diag_done = true;
                    continue;
                }
                emit(u, 1.0);
                diag_done = true;
            }
            emit(v, ws[i]);
        }
        if (!diag_done) {
            emit(u, 1.0);
        }
        row_ptr[u + 1] = static_cast<std::int64_t>(cols.size());
    }
    return SparseGraph::from_csr(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

template <typename T>
Matrix<T> spmm(const SparseGraph& g, const Matrix<T>& x) {
    if (g.num_nodes() != x.rows()) {
        throw ShapeError("spmm: graph has " + std::to_string(g.num_nodes()) +
                         " nodes but x is " + shape_str(x));
    }
    const std::size_t d = x.cols();
    Matrix<T> out(x.rows(), d);
    parallel_blocks(g.num_nodes(), 512, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t u = r0; u < r1; ++u) {
            T* dst = out.row(u).data();
            const auto nb = g.neighbors(u);
            const auto ws = g.weights(u);
            for (std::size_t i = 0; i < nb.size(); ++i) {
                const T w = static_cast<T>(ws[i]);
                const T* src = x.row(static_cast<std::size_t>(nb[i])).data();
                for (std::size_t c = 0; c < d; ++c) {
                    dst[c] += w * src[c];
                }
            }
        }
    });
    return out;
}

template Matrix<float> spmm(const SparseGraph&, const Matrix<float>&);
template Matrix<double> spmm(const SparseGraph&, const Matrix<double>&);

SparseGraph induced_subgraph(const SparseGraph& g, std::span<const NodeId> nodes) {
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        if (nodes[i - 1] >= nodes[i]) {
            throw ShapeError("induced_subgraph: node list must be strictly increasing");
        }
    }
    std::vector<std::int64_t> row_ptr(nodes.size() + 1, 0);
    std::vector<NodeId> cols;
    std::vector<double> vals;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto u = static_cast<std::size_t>(nodes[i]);
        if (u >= g.num_nodes()) {
            throw ShapeError("induced_subgraph: node id out of range");
        }
        const auto nb = g.neighbors(u);
        const auto ws = g.weights(u);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const auto it = std::lower_bound(nodes.begin(), nodes.end(), nb[k]);
            if (it != nodes.end() && *it == nb[k]) {
                cols.push_back(static_cast<NodeId>(it - nodes.begin()));
                vals.push_back(ws[k]);
            }
        }
        row_ptr[i + 1] = static_cast<std::int64_t>(cols.size());
    }
    return SparseGraph::from_csr(nodes.size(), std::move(row_ptr), std::move(cols),
                                 std::move(vals));
}

// ---------------------------------------------------------------------------
// Dataset

std::string to_string(Task t) { return t == Task::Multiclass ? "multiclass" : "multilabel"; }

Task task_from_string(const std::string& s) {
    if (s == "multiclass") {
        return Task::Multiclass;
    }
    if (s == "multilabel") {
        return Task::Multilabel;
    }
    throw DataError("unknown task '" + s + "'");
}

void NodeDataset::validate() const {
    const std::size_t n = num_nodes();
    if (features.rows() != n) {
        throw DataError("features have " + std::to_string(features.rows()) + " rows, graph has " +
                        std::to_string(n) + " nodes");
    }
    if (labels.task == Task::Multiclass) {
        if (labels.classes.size() != n) {
            throw DataError("expected one label per node");
        }
        for (auto c : labels.classes) {
            if (c < 0 || static_cast<std::size_t>(c) >= labels.num_outputs) {
                throw DataError("class label " + std::to_string(c) + " out of range");
            }
        }
    } else {
        if (labels.binary.rows() != n || labels.binary.cols() != labels.num_outputs) {
            throw DataError("multilabel matrix has shape " + shape_str(labels.binary));
        }
        for (float v : labels.binary.flat()) {
            if (v != 0.0f && v != 1.0f) {
                throw DataError("multilabel entries must be 0 or 1");
            }
        }
    }
    std::vector<std::uint8_t> seen(n, 0);
    auto check = [&](const std::vector<NodeId>& ids, const char* name) {
        for (NodeId id : ids) {
            if (id < 0 || static_cast<std::size_t>(id) >= n) {
                throw DataError(std::string("split '") + name + "' has node id " +
                                std::to_string(id) + " out of range");
            }
            if (seen[static_cast<std::size_t>(id)]++) {
                throw DataError(std::string("split '") + name + "': node " + std::to_string(id) +
                                " appears in more than one split (or twice)");
            }
        }
    };
    check(split.train, "train");
    check(split.valid, "valid");
    check(split.test, "test");
}

Matrix<float> gather_rows(const Matrix<float>& features, std::span<const NodeId> nodes) {
    Matrix<float> out(nodes.size(), features.cols());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto src = features.row(static_cast<std::size_t>(nodes[i]));
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

namespace {

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) {
        throw DataError("cannot open " + p.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in " + p.string() + ": " + e.what());
    }
}

std::vector<NodeId> id_list(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array()) {
        throw DataError(std::string("split.json lacks array '") + key + "'");
    }
    std::vector<NodeId> out;
    out.reserve(j[key].size());
    for (const auto& v : j[key]) {
        if (!v.is_number_integer()) {
            throw DataError(std::string("split.json '") + key + "' holds a non-integer");
        }
        out.push_back(v.get<NodeId>());
    }
    return out;
}

Matrix<float> read_features_bin(const fs::path& p, std::size_t n, std::size_t d) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + p.string());
    }
    const auto bytes = fs::file_size(p);
    if (bytes != n * d * sizeof(float)) {
        throw DataError("features.bin has " + std::to_string(bytes) + " bytes, expected " +
                        std::to_string(n * d * sizeof(float)));
    }
    Matrix<float> m(n, d);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(bytes));
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : m.flat()) {
            std::uint32_t u;
            std::memcpy(&u, &v, 4);
            u = __builtin_bswap32(u);
            std::memcpy(&v, &u, 4);
        }
    }
    return m;
}

Matrix<float> read_features_csv(const fs::path& p, std::size_t n, std::size_t d) {
    Matrix<float> m(n, d);
    std::size_t r = 0;
    detail::for_each_csv_row(p, [&](std::size_t line, std::span<const std::string_view> cells) {
        if (r >= n) {
            throw DataError(p.string() + ":" + std::to_string(line) + ": more rows than nodes");
        }
        if (cells.size() != d) {
            throw DataError(p.string() + ":" + std::to_string(line) + ": expected " +
                            std::to_string(d) + " columns");
        }
        for (std::size_t c = 0; c < d; ++c) {
            m(r, c) = static_cast<float>(detail::parse_double(cells[c], p, line));
        }
        ++r;
    });
    if (r != n) {
        throw DataError(p.string() + ": " + std::to_string(r) + " rows, expected " +
                        std::to_string(n));
    }
    return m;
}

} // namespace

NodeDataset load_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw DataError("dataset directory " + dir.string() + " does not exist");
    }
    const json meta = read_json(dir / "meta.json");
    NodeDataset ds;
    std::size_t n = 0;
    std::size_t d = 0;
    try {
        n = meta.at("num_nodes").get<std::size_t>();
        d = meta.at("num_features").get<std::size_t>();
        ds.labels.num_outputs = meta.at("num_classes").get<std::size_t>();
        ds.labels.task = task_from_string(meta.at("task").get<std::string>());
    } catch (const json::exception& e) {
        throw DataError("meta.json: " + std::string(e.what()));
    }

    std::vector<Edge> edges;
    const fs::path edge_path = dir / "edges.csv";
    detail::for_each_csv_row(edge_path, [&](std::size_t line,
                                            std::span<const std::string_view> cells) {
        if (cells.size() != 2 && cells.size() != 3) {
            throw DataError(edge_path.string() + ":" + std::to_string(line) +
                            ": expected src,dst[,weight]");
        }
        Edge e;
        e.src = detail::parse_int<NodeId>(cells[0], edge_path, line);
        e.dst = detail::parse_int<NodeId>(cells[1], edge_path, line);
        if (cells.size() == 3) {
            e.weight = detail::parse_double(cells[2], edge_path, line);
        }
        edges.push_back(e);
    });
    ds.graph = SparseGraph::from_edges(n, edges);

    if (fs::exists(dir / "features.bin")) {
        ds.features = read_features_bin(dir / "features.bin", n, d);
    } else if (fs::exists(dir / "features.csv")) {
        ds.features = read_features_csv(dir / "features.csv", n, d);
    } else {
        throw DataError("dataset lacks features.bin / features.csv in " + dir.string());
    }

    const fs::path label_path = dir / "labels.csv";
    if (ds.labels.task == Task::Multiclass) {
        ds.labels.classes.assign(n, -1);
        detail::for_each_csv_row(label_path, [&](std::size_t line,
                                                 std::span<const std::string_view> cells) {
            if (cells.size() != 2) {
                throw DataError(label_path.string() + ":" + std::to_string(line) +
                                ": expected node,label");
            }
            const auto node = detail::parse_int<NodeId>(cells[0], label_path, line);
            const auto label = detail::parse_int<std::int32_t>(cells[1], label_path, line);
            if (node < 0 || static_cast<std::size_t>(node) >= n) {
                throw DataError(label_path.string() + ":" + std::to_string(line) +
                                ": node id out of range");
            }
            if (ds.labels.classes[static_cast<std::size_t>(node)] != -1) {
                throw DataError(label_path.string() + ":" + std::to_string(line) +
                                ": node labelled twice");
            }
            ds.labels.classes[static_cast<std::size_t>(node)] = label;
        });
        for (std::size_t u = 0; u < n; ++u) {
            if (ds.labels.classes[u] == -1) {
                throw DataError("labels.csv: node " + std::to_string(u) + " has no label");
            }
        }
    } else {
        const std::size_t t = ds.labels.num_outputs;
        ds.labels.binary = Matrix<float>(n, t);
        std::size_t r = 0;
        detail::for_each_csv_row(label_path, [&](std::size_t line,
                                                 std::span<const std::string_view> cells) {
            if (r >= n || cells.size() != t) {
                throw DataError(label_path.string() + ":" + std::to_string(line) +
                                ": expected " + std::to_string(t) + " columns and " +
                                std::to_string(n) + " rows");
            }
            for (std::size_t c = 0; c < t; ++c) {
                ds.labels.binary(r, c) =
                    static_cast<float>(detail::parse_int<int>(cells[c], label_path, line));
            }
            ++r;
        });
        if (r != n) {
            throw DataError("labels.csv: " + std::to_string(r) + " rows, expected " +
                            std::to_string(n));
        }
    }

    const json split = read_json(dir / "split.json");
    ds.split.train = id_list(split, "train");
    ds.split.valid = id_list(split, "valid");
    ds.split.test = id_list(split, "test");

    ds.validate();
    return ds;
}

void save_dataset(const NodeDataset& ds, const fs::path& dir) {
    ds.validate();
    fs::create_directories(dir);

    json meta = {{"num_nodes", ds.num_nodes()},
                 {"num_features", ds.num_features()},
                 {"num_classes", ds.labels.num_outputs},
                 {"task", to_string(ds.labels.task)}};
    detail::write_text(dir / "meta.json", meta.dump(2) + "\n");

    const auto edges = ds.graph.undirected_edges();
    const bool weighted =
        std::any_of(edges.begin(), edges.end(), [](const Edge& e) { return e.weight != 1.0; });
    std::string text = weighted ? "src,dst,weight\n" : "src,dst\n";
    for (const Edge& e : edges) {
        text += std::to_string(e.src);
        text += ',';
        text += std::to_string(e.dst);
        if (weighted) {
            text += ',';
            text += detail::format_double(e.weight);
        }
        text += '\n';
    }
    detail::write_text(dir / "edges.csv", text);

    {
        std::ofstream out(dir / "features.bin", std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot write " + (dir / "features.bin").string());
        }
        static_assert(std::endian::native == std::endian::little,
                      "features.bin writer assumes a little-endian host");
        out.write(reinterpret_cast<const char*>(ds.features.data()),
                  static_cast<std::streamsize>(ds.features.size() * sizeof(float)));
    }
    fs::remove(dir / "features.csv");

    text.clear();
    if (ds.labels.task == Task::Multiclass) {
        text = "node,label\n";
        for (std::size_t u = 0; u < ds.num_nodes(); ++u) {
            text += std::to_string(u) + "," + std::to_string(ds.labels.classes[u]) + "\n";
        }
    } else {
        for (std::size_t u = 0; u < ds.num_nodes(); ++u) {
            for (std::size_t c = 0; c < ds.labels.num_outputs; ++c) {
                text += c ? "," : "";
                text += ds.labels.binary(u, c) != 0.0f ? "1" : "0";
            }
            text += '\n';
        }
    }
    detail::write_text(dir / "labels.csv", text);

    json split = {{"train", ds.split.train}, {"valid", ds.split.valid}, {"test", ds.split.test}};
    detail::write_text(dir / "split.json", split.dump() + "\n");
}

} // namespace sgf
