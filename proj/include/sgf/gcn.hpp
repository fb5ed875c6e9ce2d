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

#include <sgf/ops.hpp>

#include <random>
#include <vector>

namespace sgf {

// Shallow GCN over a normalized adjacency. Layer l computes
// A~ z W_l (+ b_l); every layer but the last is followed by ReLU and
// dropout, so the branch can emit signed embeddings.
template <typename T>
struct GcnStack {
    std::vector<Matrix<T>> weights; // d x d each
    std::vector<Matrix<T>> biases;  // 1 x d each, empty when disabled
    double dropout_p = 0.0;
    bool use_relu_between = true;

    std::size_t depth() const noexcept { return weights.size(); }
    bool has_bias() const noexcept { return !biases.empty(); }
    void validate() const;
};

namespace ad {

// Tape form. `w` and `b` hold one Var per layer (b may be empty). `rng` is
// only touched when training with a nonzero dropout rate.
template <typename T>
Var gcn_forward(Tape<T>& t, const SparseGraph& g_norm, Var z0, const std::vector<Var>& w,
                const std::vector<Var>& b, double dropout_p, bool use_relu_between,
                bool training, std::mt19937_64* rng);

} // namespace ad

// Value-only convenience wrapper.
template <typename T>
Matrix<T> gcn_forward(const GcnStack<T>& stack, const Matrix<T>& z0, const SparseGraph& g_norm,
                      bool training, std::mt19937_64* rng = nullptr);

} // namespace sgf
