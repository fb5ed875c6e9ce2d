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

#include <sgf/tape.hpp>

namespace sgf {

// Scaling of the cross term Q~ K~^T. Only InverseN is correct; the other
// value exists so the verification suite can prove it catches a wrong scale.
enum class AttentionScale { InverseN, InverseSqrtN };

struct AttentionOptions {
    AttentionScale scale = AttentionScale::InverseN;
};

template <typename T>
struct ExplicitAttention {
    Matrix<T> z; // N x dv
    Matrix<T> c; // N x N, row-stochastic
};

/// Single-head global attention, quadratic reference form:
///   Cbar = I + (1/N) (Q/|Q|_F)(K/|K|_F)^T,  C = diag^-1(Cbar 1) Cbar,  Z = C V.
/// Throws NumericError when |Q|_F or |K|_F is below eps_div or a row sum of
/// Cbar is.
template <typename T>
ExplicitAttention<T> attention_explicit(const Matrix<T>& q, const Matrix<T>& k,
                                        const Matrix<T>& v);

/// The same Z computed in O(N d^2) without any N x N intermediate:
///   den_u = 1 + (1/N) q~_u . (K~^T 1),  Z_u = (v_u + (1/N) q~_u (K~^T V)) / den_u.
template <typename T>
Matrix<T> attention_linear(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                           const AttentionOptions& opts = {});

namespace ad {

// Fused linear attention with a hand-derived backward. Saves K~^T 1, K~^T V
// and the denominators; nothing quadratic in N.
template <typename T>
Var linear_attention(Tape<T>& t, Var q, Var k, Var v, const AttentionOptions& opts = {});

// Quadratic attention composed from primitive tape ops (oracle path).
template <typename T>
Var explicit_attention(Tape<T>& t, Var q, Var k, Var v);

} // namespace ad

struct AttentionGradReport {
    // max |grad_linear - grad_explicit| / max |grad_explicit| over Q, K, V.
    double vs_explicit = 0.0;
    // Same measure against central finite differences (h = 1e-5).
    double vs_finite_diff = 0.0;
    bool explicit_ok = false;
    bool finite_diff_ok = false;
    bool ok() const noexcept { return explicit_ok && finite_diff_ok; }
};

/// Gradients of sum(Z) w.r.t. Q, K, V through the linear path, checked
/// against the explicit path (1e-9) and finite differences (1e-5). N <= 64.
AttentionGradReport attention_backward_check(const Matrix<double>& q, const Matrix<double>& k,
                                             const Matrix<double>& v,
                                             const AttentionOptions& opts = {});

} // namespace sgf
