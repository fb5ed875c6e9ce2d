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

#pragma once

#include <sgf/matrix.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace sgf {

using NodeId = std::int32_t;

struct Edge {
    NodeId src;
    NodeId dst;
    double weight = 1.0;
};

/// Symmetric adjacency in canonical CSR form.
///
/// Invariants: row_ptr is non-decreasing with row_ptr.back() == col_idx.size();
/// columns are strictly increasing within each row; (u,v) is present iff
/// (v,u) is present with the same weight.
class SparseGraph {
public:
    SparseGraph() : row_ptr_{0} {}

    /// Builds the canonical symmetric graph from an undirected edge list.
    /// Both (u,v) and (v,u) in the input collapse to one undirected edge;
    /// repeating an edge with a different weight is a DataError.
    static SparseGraph from_edges(std::size_t num_nodes, std::span<const Edge> edges);

    /// Adopts raw CSR arrays after validating every invariant.
    static SparseGraph from_csr(std::size_t num_nodes, std::vector<std::int64_t> row_ptr,
                                std::vector<NodeId> col_idx, std::vector<double> edge_val);

    std::size_t num_nodes() const noexcept { return row_ptr_.size() - 1; }
    /// Directed CSR entries (each undirected non-loop edge counts twice).
    std::size_t num_entries() const noexcept { return col_idx_.size(); }
    /// Undirected edges, self-loops counted once.
    std::size_t num_undirected_edges() const noexcept;

    const std::vector<std::int64_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<NodeId>& col_idx() const noexcept { return col_idx_; }
    const std::vector<double>& edge_val() const noexcept { return edge_val_; }

    std::span<const NodeId> neighbors(std::size_t u) const noexcept {
        return {col_idx_.data() + row_ptr_[u],
                static_cast<std::size_t>(row_ptr_[u + 1] - row_ptr_[u])};
    }
    std::span<const double> weights(std::size_t u) const noexcept {
        return {edge_val_.data() + row_ptr_[u],
                static_cast<std::size_t>(row_ptr_[u + 1] - row_ptr_[u])};
    }

    /// Weight of (u,v), 0 when absent.
    double weight(std::size_t u, std::size_t v) const noexcept;

    /// Undirected edge list with src <= dst, in CSR order.
    std::vector<Edge> undirected_edges() const;

    /// Dense N x N copy (tests and the energy lab only).
    Matrix<double> to_dense() const;

    friend bool operator==(const SparseGraph&, const SparseGraph&) = default;

private:
    std::vector<std::int64_t> row_ptr_;
    std::vector<NodeId> col_idx_;
    std::vector<double> edge_val_;
};

/// D^-1/2 (A + I) D^-1/2 with D = rowsum(A + I). Isolated nodes get a unit
/// self-loop.
SparseGraph normalize_gcn(const SparseGraph& g);

/// out[u] = sum_v g[u,v] * x[v], accumulated in ascending column order.
template <typename T>
Matrix<T> spmm(const SparseGraph& g, const Matrix<T>& x);

/// Subgraph induced by `nodes` (must be strictly increasing). Node i of the
/// result is nodes[i].
SparseGraph induced_subgraph(const SparseGraph& g, std::span<const NodeId> nodes);

enum class Task { Multiclass, Multilabel };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct Split {
    std::vector<NodeId> train;
    std::vector<NodeId> valid;
    std::vector<NodeId> test;
};

struct Labels {
    Task task = Task::Multiclass;
    std::size_t num_outputs = 0;     // classes, or label columns T
    std::vector<std::int32_t> classes; // multiclass: one id per node
    Matrix<float> binary;              // multilabel: N x T in {0,1}
};

struct NodeDataset {
    SparseGraph graph;
    Matrix<float> features; // N x D
    Labels labels;
    Split split;

    std::size_t num_nodes() const noexcept { return graph.num_nodes(); }
    std::size_t num_features() const noexcept { return features.cols(); }

    /// Throws DataError if any cross-field invariant is violated.
    void validate() const;
};

/// Reads meta.json, edges.csv, features.bin|features.csv, labels.csv and
/// split.json from `dir`.
NodeDataset load_dataset(const std::filesystem::path& dir);

/// Writes the same layout. Features always go to features.bin.
void save_dataset(const NodeDataset& ds, const std::filesystem::path& dir);

/// Rows of `features` for `nodes`, in that order.
Matrix<float> gather_rows(const Matrix<float>& features, std::span<const NodeId> nodes);

} // namespace sgf
