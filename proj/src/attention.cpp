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

#include <sgf/attention.hpp>
#include <sgf/gradcheck.hpp>
#include <sgf/ops.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace sgf {

using kernels::gemm;
using kernels::Trans;

namespace {

template <typename T>
void validate_inputs(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v) {
    if (q.rows() == 0 || q.cols() == 0) {
        throw ShapeError("attention: need N >= 1 and d >= 1");
    }
    if (k.rows() != q.rows() || v.rows() != q.rows()) {
        throw ShapeError("attention: Q, K, V row counts differ");
    }
    if (k.cols() != q.cols()) {
        throw ShapeError("attention: Q and K widths differ");
    }
    for (const Matrix<T>* m : {&q, &k, &v}) {
        for (T x : m->flat()) {
            if (!std::isfinite(static_cast<double>(x))) {
                throw NumericError("attention: non-finite input");
            }
        }
    }
}

double frobenius(const auto& m) { return std::sqrt(kernels::sum_squares(m)); }

double cross_scale(std::size_t n, AttentionScale s) {
    const auto nn = static_cast<double>(n);
    return s == AttentionScale::InverseN ? 1.0 / nn : 1.0 / std::sqrt(nn);
}

// State shared by the fused forward and its backward.
template <typename T>
struct LinearAttnState {
    Matrix<T> ksum; // 1 x d, column sums of raw K
    Matrix<T> kv;   // d x dv, K^T V on raw K
    Matrix<T> den;  // N x 1
    double nq = 0.0;
    double nk = 0.0;
    double a = 0.0; // cross / (|Q| |K|)
};

template <typename T>
Matrix<T> linear_forward(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                         const AttentionOptions& opts, LinearAttnState<T>& st) {
    validate_inputs(q, k, v);
    const std::size_t n = q.rows();
    st.nq = frobenius(q);
    st.nk = frobenius(k);
    if (st.nq < kEpsDiv || st.nk < kEpsDiv) {
        throw NumericError("attention: Frobenius norm of Q or K below eps_div");
    }
    st.a = cross_scale(n, opts.scale) / (st.nq * st.nk);
    st.ksum = kernels::col_sums(k);
    st.kv = gemm(k, Trans::Yes, v, Trans::No);
    const Matrix<T> qk = gemm(q, Trans::No, st.ksum, Trans::Yes); // N x 1
    Matrix<T> z = gemm(q, Trans::No, st.kv, Trans::No);           // N x dv, becomes Z
    st.den = Matrix<T>(n, 1);
    const T a = static_cast<T>(st.a);
    for (std::size_t u = 0; u < n; ++u) {
        const T den = T(1) + a * qk(u, 0);
        if (!(static_cast<double>(den) >= kEpsDiv)) {
            throw NumericError("attention: degenerate denominator " +
                               std::to_string(static_cast<double>(den)) + " at row " +
                               std::to_string(u));
        }
        st.den(u, 0) = den;
        T* zr = z.row(u).data();
        const T* vr = v.row(u).data();
        for (std::size_t j = 0; j < z.cols(); ++j) {
            zr[j] = (vr[j] + a * zr[j]) / den;
        }
    }
    return z;
}

} // namespace

template <typename T>
ExplicitAttention<T> attention_explicit(const Matrix<T>& q, const Matrix<T>& k,
                                        const Matrix<T>& v) {
    validate_inputs(q, k, v);
    ad::Tape<T> tape;
    const ad::Var qv = tape.constant(q);
    const ad::Var kv = tape.constant(k);
    const ad::Var vv = tape.constant(v);
    const ad::Var z = ad::explicit_attention(tape, qv, kv, vv);
    // explicit_attention records C immediately before Z = C V.
    ExplicitAttention<T> out;
    out.z = tape.value(z);
    out.c = tape.value(ad::Var{z.id - 1});
    return out;
}

template <typename T>
Matrix<T> attention_linear(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                           const AttentionOptions& opts) {
    LinearAttnState<T> st;
    return linear_forward(q, k, v, opts, st);
}

namespace ad {

template <typename T>
Var linear_attention(Tape<T>& t, Var q, Var k, Var v, const AttentionOptions& opts) {
    LinearAttnState<T> st;
    Matrix<T> z = linear_forward(t.value(q), t.value(k), t.value(v), opts, st);
    return t.record(std::move(z), {q, k, v},
                    [q, k, v, st = std::move(st)](Tape<T>& tp, std::size_t self) {
                        const Matrix<T>& g = tp.grad_of(self);
                        const Matrix<T>& zv = tp.value(Var{self});
                        const Matrix<T>& qv = tp.value(q);
                        const Matrix<T>& kval = tp.value(k);
                        const Matrix<T>& vv = tp.value(v);
                        const std::size_t n = qv.rows();
                        const T a = static_cast<T>(st.a);

                        // num_u = v_u + a q_u kv, den_u = 1 + a q_u . ksum, Z = num / den
                        Matrix<T> dnum(g.rows(), g.cols());
                        Matrix<T> dden(n, 1);
                        for (std::size_t u = 0; u < n; ++u) {
                            const T den = st.den(u, 0);
                            T dot = 0;
                            for (std::size_t j = 0; j < g.cols(); ++j) {
                                dnum(u, j) = g(u, j) / den;
                                dot += g(u, j) * zv(u, j);
                            }
                            dden(u, 0) = -dot / den;
                        }

                        // d a, through both a-dependent terms.
                        const Matrix<T> qkv = gemm(qv, Trans::No, st.kv, Trans::No);
                        const Matrix<T> qk = gemm(qv, Trans::No, st.ksum, Trans::Yes);
                        double da = 0.0;
                        for (std::size_t u = 0; u < n; ++u) {
                            for (std::size_t j = 0; j < g.cols(); ++j) {
                                da += static_cast<double>(dnum(u, j)) *
                                      static_cast<double>(qkv(u, j));
                            }
                            da += static_cast<double>(dden(u, 0)) * static_cast<double>(qk(u, 0));
                        }

                        if (tp.requires_grad(q)) {
                            Matrix<T> dq = gemm(dnum, Trans::No, st.kv, Trans::Yes);
                            const T cq = static_cast<T>(-da * st.a / (st.nq * st.nq));
                            for (std::size_t u = 0; u < n; ++u) {
                                for (std::size_t j = 0; j < dq.cols(); ++j) {
                                    dq(u, j) = a * (dq(u, j) + dden(u, 0) * st.ksum(0, j)) +
                                               cq * qv(u, j);
                                }
                            }
                            tp.accumulate(q, std::move(dq));
                        }
                        if (tp.requires_grad(k) || tp.requires_grad(v)) {
                            Matrix<T> dkv = gemm(qv, Trans::Yes, dnum, Trans::No); // d x dv
                            for (T& x : dkv.flat()) {
                                x *= a;
                            }
                            if (tp.requires_grad(k)) {
                                Matrix<T> dksum = gemm(dden, Trans::Yes, qv, Trans::No); // 1 x d
                                Matrix<T> dk = gemm(vv, Trans::No, dkv, Trans::Yes);
                                const T ck = static_cast<T>(-da * st.a / (st.nk * st.nk));
                                for (std::size_t u = 0; u < n; ++u) {
                                    for (std::size_t j = 0; j < dk.cols(); ++j) {
                                        dk(u, j) += a * dksum(0, j) + ck * kval(u, j);
                                    }
                                }
                                tp.accumulate(k, std::move(dk));
                            }
                            if (tp.requires_grad(v)) {
                                Matrix<T> dv = gemm(kval, Trans::No, dkv, Trans::No);
                                kernels::axpy(T(1), dnum, dv);
                                tp.accumulate(v, std::move(dv));
                            }
                        }
                    });
}

template <typename T>
Var explicit_attention(Tape<T>& t, Var q, Var k, Var v) {
    const std::size_t n = t.value(q).rows();
    const Var qn = div_scalar(t, q, frobenius_norm(t, q));
    const Var kn = div_scalar(t, k, frobenius_norm(t, k));
    const Var cross = scale(t, matmul_nt(t, qn, kn), static_cast<T>(1.0 / static_cast<double>(n)));
    const Var cbar = add(t, t.constant(Matrix<T>::identity(n)), cross);
    const Var c = rowdiv(t, cbar, row_sum(t, cbar));
    return matmul(t, c, v);
}

} // namespace ad

AttentionGradReport attention_backward_check(const Matrix<double>& q, const Matrix<double>& k,
                                             const Matrix<double>& v,
                                             const AttentionOptions& opts) {
    if (q.rows() > 64) {
        throw ConfigError("attention_backward_check: N must be <= 64");
    }
    auto grads = [&](bool linear) {
        ad::Tape<double> t;
        const ad::Var qv = t.leaf(q);
        const ad::Var kv = t.leaf(k);
        const ad::Var vv = t.leaf(v);
        const ad::Var z = linear ? ad::linear_attention(t, qv, kv, vv, opts)
                                 : ad::explicit_attention(t, qv, kv, vv);
        const ad::Var s = ad::sum(t, z);
        const ad::Var leaves[] = {qv, kv, vv};
        return t.backward(s, leaves);
    };
    const auto lin = grads(true);
    const auto ref = grads(false);

    auto total = [&](const Matrix<double>& qq, const Matrix<double>& kk,
                     const Matrix<double>& vv) {
        double s = 0.0;
        const Matrix<double> z = attention_linear(qq, kk, vv, opts);
        for (double x : z.flat()) {
            s += x;
        }
        return s;
    };
    const Matrix<double> fd[] = {
        finite_difference([&](const Matrix<double>& x) { return total(x, k, v); }, q),
        finite_difference([&](const Matrix<double>& x) { return total(q, x, v); }, k),
        finite_difference([&](const Matrix<double>& x) { return total(q, k, x); }, v),
    };

    AttentionGradReport rep;
    for (std::size_t i = 0; i < 3; ++i) {
        rep.vs_explicit = std::max(rep.vs_explicit, max_relative_error(lin[i], ref[i]));
        rep.vs_finite_diff = std::max(rep.vs_finite_diff, max_relative_error(lin[i], fd[i]));
    }
    rep.explicit_ok = rep.vs_explicit <= 1e-9;
    rep.finite_diff_ok = rep.vs_finite_diff <= 1e-5;
    return rep;
}

template ExplicitAttention<float> attention_explicit(const Matrix<float>&, const Matrix<float>&,
                                                     const Matrix<float>&);
template ExplicitAttention<double> attention_explicit(const Matrix<double>&,
                                                      const Matrix<double>&,
                                                      const Matrix<double>&);
template Matrix<float> attention_linear(const Matrix<float>&, const Matrix<float>&,
                                        const Matrix<float>&, const AttentionOptions&);
template Matrix<double> attention_linear(const Matrix<double>&, const Matrix<double>&,
                                         const Matrix<double>&, const AttentionOptions&);
template ad::Var ad::linear_attention(ad::Tape<float>&, ad::Var, ad::Var, ad::Var,
                                      const AttentionOptions&);
template ad::Var ad::linear_attention(ad::Tape<double>&, ad::Var, ad::Var, ad::Var,
                                      const AttentionOptions&);
template ad::Var ad::explicit_attention(ad::Tape<float>&, ad::Var, ad::Var, ad::Var);
template ad::Var ad::explicit_attention(ad::Tape<double>&, ad::Var, ad::Var, ad::Var);

} // namespace sgf
