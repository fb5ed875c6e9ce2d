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

#include <sgf/attention.hpp>
#include <sgf/gcn.hpp>
#include <sgf/graph.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace sgf {

struct ModelConfig {
    std::size_t in_dim = 0;  // D
    std::size_t hidden = 64; // d
    std::size_t out_dim = 0; // C
    std::size_t gcn_depth = 2;
    // Nominal range is [0, 1); 1 is accepted for the pure-GCN ablation.
    double alpha = 0.5;
    double dropout = 0.0;
    bool attn_bias = true; // f_Q, f_K, f_V
    bool gcn_bias = true;
    Task task = Task::Multiclass;

    void validate() const;
};

enum class AttentionVariant { Linear, Explicit };

template <typename T>
struct SgformerParams {
    ModelConfig config;
    Matrix<T> w_in, b_in;
    Matrix<T> w_q, b_q, w_k, b_k, w_v, b_v; // biases empty when attn_bias is off
    GcnStack<T> gcn;
    Matrix<T> w_out, b_out;

    // Every tensor in checkpoint order (empty biases skipped).
    std::vector<Matrix<T>*> tensors();
    std::vector<const Matrix<T>*> tensors() const;
    std::vector<std::string> tensor_names() const;
    std::size_t num_parameters() const;

    template <typename U>
    SgformerParams<U> cast() const;
};

/// Glorot-uniform weights, zero biases.
template <typename T>
SgformerParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

struct ForwardOptions {
    bool training = false;
    AttentionVariant variant = AttentionVariant::Linear;
    AttentionOptions attention{};
};

// Handles produced by the tape forward pass.
struct ForwardVars {
    ad::Var logits;
    ad::Var z_attn;
    ad::Var z_gcn;
    ad::Var z_out;
    std::vector<ad::Var> params; // same order as SgformerParams::tensors()
};

/// Records the full model on `t`. Parameters become leaves when
/// `track_grads` is set, constants otherwise.
template <typename T>
ForwardVars forward(ad::Tape<T>& t, const SgformerParams<T>& p, const SparseGraph& g_norm,
                    const Matrix<T>& x, const ForwardOptions& opts, std::mt19937_64* rng,
                    bool track_grads);

/// Inference logits for a feature block and its normalized graph.
template <typename T>
Matrix<T> predict(const SgformerParams<T>& p, const SparseGraph& g_norm, const Matrix<T>& x,
                  const ForwardOptions& opts = {});

/// Random node partition used by both mini-batch training and batched
/// inference: a seeded shuffle cut into ceil(N / B) batches, each sorted.
std::vector<std::vector<NodeId>> random_partition(std::size_t n, std::size_t batch_size,
                                                  std::mt19937_64& rng);

/// Full-graph inference, or per-batch inference on induced subgraphs when
/// batch_size is set. Logits come back in original node order.
template <typename T>
Matrix<T> predict_full_graph(const SgformerParams<T>& p, const NodeDataset& ds,
                             std::optional<std::size_t> batch_size = std::nullopt,
                             std::uint64_t seed = 0, const ForwardOptions& opts = {});

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes the SGF1 checkpoint (float32 payload).
template <typename T>
void save_checkpoint(const SgformerParams<T>& p, const std::filesystem::path& path);

SgformerParams<float> load_checkpoint(const std::filesystem::path& path);

} // namespace sgf
