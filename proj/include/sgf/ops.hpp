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

#include <sgf/graph.hpp>
#include <sgf/tape.hpp>

#include <cstdint>
#include <random>
#include <span>

// Differentiable operations recorded on a Tape. Broadcasting is limited to a
// 1 x cols row vector over a matrix (add_row); everything else is same-shape.
namespace sgf::ad {

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b);

// a * b^T
template <typename T>
Var matmul_nt(Tape<T>& t, Var a, Var b);

// a^T * b
template <typename T>
Var matmul_tn(Tape<T>& t, Var a, Var b);

// x * w (+ bias as a row vector). Pass an invalid Var for no bias.
template <typename T>
Var linear(Tape<T>& t, Var x, Var w, Var bias);

template <typename T>
Var add(Tape<T>& t, Var a, Var b);

template <typename T>
Var sub(Tape<T>& t, Var a, Var b);

template <typename T>
Var scale(Tape<T>& t, Var a, T c);

template <typename T>
Var hadamard(Tape<T>& t, Var a, Var b);

// max(x, 0); the subgradient at 0 is 0.
template <typename T>
Var relu(Tape<T>& t, Var x);

template <typename T>
Var add_row(Tape<T>& t, Var x, Var row);

// x_ij / d_i for an N x 1 divisor. Throws NumericError if any d_i < eps_div.
template <typename T>
Var rowdiv(Tape<T>& t, Var x, Var d);

// x / s for a 1 x 1 divisor. Throws NumericError if s < eps_div.
template <typename T>
Var div_scalar(Tape<T>& t, Var x, Var s);

template <typename T>
Var row_sum(Tape<T>& t, Var x);

template <typename T>
Var col_sum(Tape<T>& t, Var x);

template <typename T>
Var sum(Tape<T>& t, Var x);

template <typename T>
Var frobenius_norm(Tape<T>& t, Var x);

// g * x for a sparse symmetric g. The graph must outlive the tape.
template <typename T>
Var spmm(Tape<T>& t, const SparseGraph& g, Var x);

// Inverted dropout: keeps each entry with probability 1 - p, scaled by
// 1 / (1 - p). Identity when p == 0.
template <typename T>
Var dropout(Tape<T>& t, Var x, double p, std::mt19937_64& rng);

// Mean over `rows` of -log softmax(logits_u)[labels_u].
template <typename T>
Var softmax_cross_entropy(Tape<T>& t, Var logits, std::span<const std::int32_t> labels,
                          std::span<const NodeId> rows);

// Mean over `rows` and all columns of the sigmoid binary cross-entropy.
template <typename T>
Var sigmoid_bce(Tape<T>& t, Var logits, const Matrix<float>& targets,
                std::span<const NodeId> rows);

} // namespace sgf::ad
