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

#include <sgf/model.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sgf {

enum class Precision { F32, F64 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

struct RunConfig {
    double lr = 0.01;
    double weight_decay = 5e-4;
    double dropout = 0.5;
    std::size_t hidden = 64;
    std::size_t gcn_depth = 2;
    double alpha = 0.5;
    std::size_t epochs = 300;
    std::size_t batch_size = 0; // 0 = full graph
    std::uint64_t seed = 0;
    Precision precision = Precision::F32;
    std::size_t patience = 0; // 0 = no early stop
    bool attn_bias = true;
    bool gcn_bias = true;
    AttentionScale attention_scale = AttentionScale::InverseN;

    void validate() const;
    ModelConfig model_config(const NodeDataset& ds) const;
};

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double loss = 0.0;     // mean over optimizer steps
    double train = 0.0;
    double valid = 0.0;
    double test = 0.0;
    double ms = 0.0;
};

struct Metrics {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_valid = 0.0;
    double best_test = 0.0;
    std::size_t peak_bytes = 0;
    std::size_t skipped_batches = 0;
};

struct AdamState {
    std::vector<Matrix<double>> m;
    std::vector<Matrix<double>> v;
    std::uint64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// One Adam step with decoupled weight decay:
/// p -= lr * wd * p, then the bias-corrected Adam update. Moments are kept
/// in double regardless of the parameter precision.
template <typename T>
void adam_step(std::span<Matrix<T>* const> params, std::span<const Matrix<T>> grads,
               AdamState& state, double lr, double weight_decay);

/// Accuracy over `mask` of argmax(logits) against class ids.
template <typename T>
double accuracy(const Matrix<T>& logits, std::span<const std::int32_t> classes,
                std::span<const NodeId> mask);

/// Exact ROC-AUC via average ranks (ties count one half).
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Task-appropriate score: accuracy, or ROC-AUC averaged over label columns
/// that contain both classes within the mask.
template <typename T>
double evaluate(const Matrix<T>& logits, const Labels& labels, std::span<const NodeId> mask);

template <typename T>
struct TrainResult {
    SgformerParams<T> params; // best-valid epoch
    Metrics metrics;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Algorithm 1 with optional random mini-batches. `timing` off writes 0 ms
/// so two runs can be compared byte for byte.
template <typename T>
TrainResult<T> train(const NodeDataset& ds, const RunConfig& cfg, const EpochCallback& on_epoch = {},
                     bool timing = true);

struct GridSpec {
    std::vector<double> lr{0.001, 0.005, 0.01, 0.05, 0.1};
    std::vector<double> weight_decay{1e-5, 1e-4, 5e-4, 1e-3, 1e-2};
    std::vector<std::size_t> hidden{32, 64, 128, 256};
    std::vector<double> dropout{0.0, 0.2, 0.3, 0.5};
    std::vector<double> alpha{0.5, 0.8};

    std::size_t size() const noexcept;
};

struct GridResult {
    RunConfig best;
    Metrics best_metrics;
    std::size_t runs = 0;
};

/// Exhaustive search selecting on validation score (ties: first in grid order).
GridResult grid_search(const NodeDataset& ds, const RunConfig& base, const GridSpec& grid,
                       const std::function<void(const RunConfig&, const Metrics&)>& on_run = {});

// ---- metrics JSONL -----------------------------------------------------------

std::string epoch_json(const EpochRecord& r);

/// Every RunConfig field as a flat JSON object, keys in declaration order.
std::string run_config_json(const RunConfig& c);

/// Final line of a metrics file: the summary plus the resolved config.
std::string summary_json(const Metrics& m, const std::string& config_json);

} // namespace sgf
