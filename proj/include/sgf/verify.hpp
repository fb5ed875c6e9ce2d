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

#include <cstdint>
#include <string>
#include <vector>

namespace sgf {

// Per-tensor result of the whole-model gradient check.
struct TensorGradError {
    std::string name;
    std::size_t size = 0;
    double rel_error = 0.0; // max |tape - fd| / max |fd|
};

struct ModelGradOptions {
    std::size_t nodes = 16;
    std::size_t feat_dim = 4;
    std::size_t hidden = 8;
    std::size_t classes = 3;
    std::size_t gcn_depth = 2;
    double alpha = 0.5;
    // Dropout is kept on; every loss evaluation reseeds the mask RNG so the
    // finite differences see the same masks as the tape.
    double dropout = 0.2;
    double h = 1e-6;
    std::uint64_t seed = 0;
    AttentionOptions attention{};
};

/// Training loss of the full model on a small SBM (float64); every parameter
/// entry is compared against central differences.
std::vector<TensorGradError> model_gradient_check(const ModelGradOptions& opts);

struct VerifyOptions {
    std::uint64_t seed = 0;
    std::size_t trials = 10; // random instances per group
    // Fault injection: flips the linear attention cross-term scale.
    AttentionScale scale = AttentionScale::InverseN;
};

struct VerifyGroup {
    std::string name;
    bool pass = false;
    std::vector<std::string> lines; // detail lines, deterministic text
};

struct VerifyReport {
    std::vector<VerifyGroup> groups;
    std::vector<std::string> info; // diagnostics that do not gate the result

    bool ok() const;
    /// Plain-text report; identical for identical options.
    std::string text() const;
};

VerifyReport run_verify(const VerifyOptions& opts);

} // namespace sgf
