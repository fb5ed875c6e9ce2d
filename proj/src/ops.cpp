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

#include <sgf/ops.hpp>

#include <algorithm>
#include <cmath>

namespace sgf::ad {

using kernels::gemm;
using kernels::Trans;

namespace {

template <typename T>
void require_same_shape(const Matrix<T>& a, const Matrix<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
    }
}

template <typename T, typename Fn>
Matrix<T> map(const Matrix<T>& x, Fn fn) {
    Matrix<T> out(x.rows(), x.cols());
    const T* src = x.data();
    T* dst = out.data();
    for (std::size_t i = 0, n = x.size(); i < n; ++i) {
        dst[i] = fn(src[i]);
    }
    return out;
}

template <typename T, typename Fn>
Matrix<T> zip(const Matrix<T>& a, const Matrix<T>& b, Fn fn) {
    Matrix<T> out(a.rows(), a.cols());
    for (std::size_t i = 0, n = a.size(); i < n; ++i) {
        out.data()[i] = fn(a.data()[i], b.data()[i]);
    }
    return out;
}

} // namespace

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
    Matrix<T> out = gemm(t.value(a), Trans::No, t.value(b), Trans::No);
    return t.record(std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
        const Matrix<T>& g = tp.grad_of(self);
        if (tp.requires_grad(a)) {
            tp.accumulate(a, gemm(g, Trans::No, tp.value(b), Trans::Yes));
        }
        if (tp.requires_grad(b)) {
            tp.accumulate(b, gemm(tp.value(a), Trans::Yes, g, Trans::No));
        }
    });
}

template <typename T>
Var matmul_nt(Tape<T>& t, Var a, Var b) {
    Matrix<T> out = gemm(t.value(a), Trans::No, t.value(b), Trans::Yes);
    return t.record(std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
        const Matrix<T>& g = tp.grad_of(self);
        if (tp.requires_grad(a)) {
            tp.accumulate(a, gemm(g, Trans::No, tp.value(b), Trans::No));
        }
        if (tp.requires_grad(b)) {
            tp.accumulate(b, gemm(g, Trans::Yes, tp.value(a), Trans::No));
        }
    });
}

template <typename T>
Var matmul_tn(Tape<T>& t, Var a, Var b) {
    Matrix<T> out = gemm(t.value(a), Trans::Yes, t.value(b), Trans::No);
    return t.record(std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
        const Matrix<T>& g = tp.grad_of(self);
        if (tp.requires_grad(a)) {
            tp.accumulate(a, gemm(tp.value(b), Trans::No, g, Trans::Yes));
        }
        if (tp.requires_grad(b)) {
            tp.accumulate(b, gemm(tp.value(a), Trans::No, g, Trans::No));
        }
    });
}

template <typename T>
Var linear(Tape<T>& t, Var x, Var w, Var bias) {
    Matrix<T> out = gemm(t.value(x), Trans::No, t.value(w), Trans::No);
    if (bias.valid()) {
        const Matrix<T>& b = t.value(bias);
        if (b.rows() != 1 || b.cols() != out.cols()) {
            throw ShapeError("linear: bias " + shape_str(b) + " does not fit output " +
                             shape_str(out));
        }
        for (std::size_t r = 0; r < out.rows(); ++r) {
            T* dst = out.row(r).data();
            for (std::size_t c = 0; c < out.cols(); ++c) {
                dst[c] += b(0, c);
            }
        }
        return t.record(std::move(out), {x, w, bias},
                        [x, w, bias](Tape<T>& tp, std::size_t self) {
                            const Matrix<T>& g = tp.grad_of(self);
                            if (tp.requires_grad(x)) {
                                tp.accumulate(x, gemm(g, Trans::No, tp.value(w), Trans::Yes));
                            }
                            if (tp.requires_grad(w)) {
                                tp.accumulate(w, gemm(tp.value(x), Trans::Yes, g, Trans::No));
                            }
                            if (tp.requires_grad(bias)) {
                                tp.accumulate(bias, kernels::col_sums(g));
                            }
                        });
    }
    return t.record(std::move(out), {x, w}, [x, w](Tape<T>& tp, std::size_t self) {
        const Matrix<T>& g = tp.grad_of(self);
        if (tp.requires_grad(x)) {
            tp.accumulate(x, gemm(g, Trans::No, tp.value(w), Trans::Yes));
        }
        if (tp.requires_grad(w)) {
            tp.accumulate(w, gemm(tp.value(x), Trans::Yes, g, Trans::No));
        }
    });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "add");
    Matrix<T> out = zip(t.value(a), t.value(b), [](T x, T y) { return x + y; });
    return t.record(std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
        if (tp.requires_grad(a)) {
            tp.accumulate(a, Matrix<T>(tp.grad_of(self)));
        }
        if (tp.requires_grad(b)) {
            tp.accumulate(b, Matrix<T>(tp.grad_of(self)));
        }
    });
}

template <typename T>
Var sub(Tape<T>& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "sub");
    Matrix<T> out = zip(t.value(a), t.value(b), [](T x, T y) { return x - y; });
    return t.record(std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
        if (tp.requires_grad(a)) {
            tp.accumulate(a, Matrix<T>(tp.grad_of(self)));
        }
        if (tp.requires_grad(b)) {
            tp.accumulate(b, map(tp.grad_of(self), [](T g) { return -g; }));
        }
    });
}

template <typename T>
Var scale(Tape<T>& t, Var a, T c) {
    Matrix<T> out = map(t.value(a), [c](T x) { return c * x; });
    return t.record(std::move(out), {a}, [a, c](Tape<T>& tp, std::size_t self) {
        tp.accumulate(a, map(tp.grad_of(self), [c](T g) { return c * g; }));
    });
}

template <typename T>
Var hadamard(Tape<T>& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "hadamard");
    Matrix<T> out = zip(t.value(a), t.value(b), [](T x, T y) { return x * y; });
    return t.record(std::move(out), {a, b}, [a, b](Tape<T>& tp, std::size_t self) {
        const Matrix<T>& g = tp.grad_of(self);
        if (tp.requires_grad(a)) {
            tp.accumulate(a, zip(g, tp.value(b), [](T x, T y) { return x * y; }));
        }
        if (tp.requires_grad(b)) {
            tp.accumulate(b, zip(g, tp.value(a), [](T x, T y) { return x * y; }));
        }
    });
}

template <typename T>
Var relu(Tape<T>& t, Var x) {
    Matrix<T> out = map(t.value(x), [](T v) { return v > T(0) ? v : T(0); });
    return t.record(std::move(out), {x}, [x](Tape<T>& tp, std::size_t self) {
        tp.accumulate(x, zip(tp.grad_of(self), tp.value(x),
                             [](T g, T v) { return v > T(0) ? g : T(0); }));
    });
}

template <typename T>
Var add_row(Tape<T>& t, Var x, Var row) {
    const Matrix<T>& xv = t.value(x);
    const Matrix<T>& rv = t.value(row);
    if (rv.rows() != 1 || rv.cols() != xv.cols()) {
        throw ShapeError("add_row: row " + shape_str(rv) + " does not broadcast over " +
                         shape_str(xv));
    }
    Matrix<T> out = xv;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            out(r, c) += rv(0, c);
        }
    }
    return t.record(std::move(out), {x, row}, [x, row](Tape<T>& tp, std::size_t self) {
        if (tp.requires_grad(x)) {
            tp.accumulate(x, Matrix<T>(tp.grad_of(self)));
        }
        if (tp.requires_grad(row)) {
            tp.accumulate(row, kernels::col_sums(tp.grad_of(self)));
        }
    });
}

template <typename T>
Var rowdiv(Tape<T>& t, Var x, Var d) {
    const Matrix<T>& xv = t.value(x);
    const Matrix<T>& dv = t.value(d);
    if (dv.rows() != xv.rows() || dv.cols() != 1) {
        throw ShapeError("rowdiv: divisor " + shape_str(dv) + " does not fit " + shape_str(xv));
    }
    for (std::size_t r = 0; r < dv.rows(); ++r) {
        if (!(static_cast<double>(dv(r, 0)) >= kEpsDiv)) {
            throw NumericError("rowdiv: degenerate denominator " +
                               std::to_string(static_cast<double>(dv(r, 0))) + " at row " +
                               std::to_string(r));
        }
    }
    Matrix<T> out(xv.rows(), xv.cols());
    for (std::size_t r = 0; r < xv.rows(); ++r) {
        for (std::size_t c = 0; c < xv.cols(); ++c) {
            out(r, c) = xv(r, c) / dv(r, 0);
        }
    }
    return t.record(std::move(out), {x, d}, [x, d](Tape<T>& tp, std::size_t self) {
        const Matrix<T>& g = tp.grad_of(self);
        const Matrix<T>& xv = tp.value(x);
        const Matrix<T>& dv = tp.value(d);
        if (tp.requires_grad(x)) {
            Matrix<T> gx(g.rows(), g.cols());
            for (std::size_t r = 0; r < g.rows(); ++r) {
                for (std::size_t c = 0; c < g.cols(); ++c) {
                    gx(r, c) = g(r, c) / dv(r, 0);
                }
            }
            tp.accumulate(x, std::move(gx));
        }
        if (tp.requires_grad(d)) {
            Matrix<T> gd(dv.rows(), 1);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                T acc = 0;
                for (std::size_t c = 0; c < g.cols(); ++c) {
                    acc += g(r, c) * xv(r, c);
                }
                gd(r, 0) = -acc / (dv(r, 0) * dv(r, 0));
            }
            tp.accumulate(d, std::move(gd));
        }
    });
}

template <typename T>
Var div_scalar(Tape<T>& t, Var x, Var s) {
    const Matrix<T>& sv = t.value(s);
    if (sv.rows() != 1 || sv.cols() != 1) {
        throw ShapeError("div_scalar: divisor must be 1x1, got " + shape_str(sv));
    }
    const T denom = sv(0, 0);
    if (!(static_cast<double>(denom) >= kEpsDiv)) {
        throw NumericError("div_scalar: degenerate denominator " +
                           std::to_string(static_cast<double>(denom)));
    }
    Matrix<T> out = map(t.value(x), [denom](T v) { return v / denom; });
    return t.record(std::move(out), {x, s}, [x, s](Tape<T>& tp, std::size_t self) {
        const Matrix<T>& g = tp.grad_of(self);
        const T denom = tp.value(s)(0, 0);
        if (tp.requires_grad(x)) {
            tp.accumulate(x, map(g, [denom](T v) { return v / denom; }));
        }
        if (tp.requires_grad(s)) {
            const Matrix<T>& xv = tp.value(x);
            T acc = 0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                acc += g.data()[i] * xv.data()[i];
            }
            tp.accumulate(s, Matrix<T>(1, 1, -acc / (denom * denom)));
        }
    });
}

template <typename T>
Var row_sum(Tape<T>& t, Var x) {
    return t.record(kernels::row_sums(t.value(x)), {x}, [x](Tape<T>& tp, std::size_t self) {
        const Matrix<T>& g = tp.grad_of(self);
        const Matrix<T>& xv = tp.value(x);
        Matrix<T> gx(xv.rows(), xv.cols());
        for (std::size_t r = 0; r < xv.rows(); ++r) {
            std::fill(gx.row(r).begin(), gx.row(r).end(), g(r, 0));
        }
        tp.accumulate(x, std::move(gx));
    });
}

template <typename T>
Var col_sum(Tape<T>& t, Var x) {
    return t.record(kernels::col_sums(t.value(x)), {x}, [x](Tape<T>& tp, std::size_t self) {
        const Matrix<T>& g = tp.grad_of(self);
        const Matrix<T>& xv = tp.value(x);
        Matrix<T> gx(xv.rows(), xv.cols());
        for (std::size_t r = 0; r < xv.rows(); ++r) {
            std::copy(g.row(0).begin(), g.row(0).end(), gx.row(r).begin());
        }
        tp.accumulate(x, std::move(gx));
    });
}

template <typename T>
Var sum(Tape<T>& t, Var x) {
    T acc = 0;
    for (T v : t.value(x).flat()) {
        acc += v;
    }
    return t.record(Matrix<T>(1, 1, acc), {x}, [x](Tape<T>& tp, std::size_t self) {
        const Matrix<T>& xv = tp.value(x);
        tp.accumulate(x, Matrix<T>(xv.rows(), xv.cols(), tp.grad_of(self)(0, 0)));
    });
}

template <typename T>
Var frobenius_norm(Tape<T>& t, Var x) {
    const T norm = static_cast<T>(std::sqrt(kernels::sum_squares(t.value(x))));
    return t.record(Matrix<T>(1, 1, norm), {x}, [x](Tape<T>& tp, std::size_t self) {
        const T g = tp.grad_of(self)(0, 0);
        const T n = tp.value(Var{self})(0, 0);
        const Matrix<T>& xv = tp.value(x);
        if (n == T(0)) {
            // Subgradient 0 at the origin.
            tp.accumulate(x, Matrix<T>(xv.rows(), xv.cols()));
            return;
        }
        tp.accumulate(x, map(xv, [g, n](T v) { return g * v / n; }));
    });
}

template <typename T>
Var spmm(Tape<T>& t, const SparseGraph& g, Var x) {
    const SparseGraph* gp = &g;
    return t.record(sgf::spmm(g, t.value(x)), {x}, [gp, x](Tape<T>& tp, std::size_t self) {
        // The graph is symmetric, so its transpose is itself.
        tp.accumulate(x, sgf::spmm(*gp, tp.grad_of(self)));
    });
}

template <typename T>
Var dropout(Tape<T>& t, Var x, double p, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError("dropout: rate must be in [0, 1)");
    }
    if (p == 0.0) {
        return x;
    }
    const Matrix<T>& xv = t.value(x);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix<T> mask(xv.rows(), xv.cols());
    for (T& m : mask.flat()) {
        m = unif(rng) >= p ? keep_scale : T(0);
    }
    Matrix<T> out = zip(xv, mask, [](T a, T b) { return a * b; });
    return t.record(std::move(out), {x},
                    [x, mask = std::move(mask)](Tape<T>& tp, std::size_t self) {
                        tp.accumulate(x, zip(tp.grad_of(self), mask,
                                             [](T a, T b) { return a * b; }));
                    });
}

template <typename T>
Var softmax_cross_entropy(Tape<T>& t, Var logits, std::span<const std::int32_t> labels,
                          std::span<const NodeId> rows) {
    if (rows.empty()) {
        throw ConfigError("loss: empty node mask");
    }
    const Matrix<T>& z = t.value(logits);
    const std::size_t c = z.cols();
    std::vector<NodeId> mask(rows.begin(), rows.end());
    std::vector<std::int32_t> target(rows.size());
    // Softmax of the masked rows, kept for backward.
    Matrix<T> prob(rows.size(), c);
    double loss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto u = static_cast<std::size_t>(rows[i]);
        if (u >= z.rows() || u >= labels.size()) {
            throw ShapeError("loss: row index out of range");
        }
        const std::int32_t y = labels[u];
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw DataError("loss: label " + std::to_string(y) + " out of range");
        }
        target[i] = y;
        const auto zr = z.row(u);
        double mx = static_cast<double>(zr[0]);
        for (T v : zr) {
            mx = std::max(mx, static_cast<double>(v));
        }
        double se = 0.0;
        for (T v : zr) {
            se += std::exp(static_cast<double>(v) - mx);
        }
        const double lse = mx + std::log(se);
        loss += lse - static_cast<double>(zr[static_cast<std::size_t>(y)]);
        for (std::size_t k = 0; k < c; ++k) {
            prob(i, k) = static_cast<T>(std::exp(static_cast<double>(zr[k]) - lse));
        }
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    return t.record(Matrix<T>(1, 1, static_cast<T>(loss * inv)), {logits},
                    [logits, mask = std::move(mask), target = std::move(target),
                     prob = std::move(prob), inv](Tape<T>& tp, std::size_t self) {
                        const Matrix<T>& z = tp.value(logits);
                        const T g = tp.grad_of(self)(0, 0) * static_cast<T>(inv);
                        Matrix<T> gz(z.rows(), z.cols());
                        for (std::size_t i = 0; i < mask.size(); ++i) {
                            const auto u = static_cast<std::size_t>(mask[i]);
                            for (std::size_t k = 0; k < z.cols(); ++k) {
                                const T onehot =
                                    static_cast<std::size_t>(target[i]) == k ? T(1) : T(0);
                                gz(u, k) += g * (prob(i, k) - onehot);
                            }
                        }
                        tp.accumulate(logits, std::move(gz));
                    });
}

template <typename T>
Var sigmoid_bce(Tape<T>& t, Var logits, const Matrix<float>& targets,
                std::span<const NodeId> rows) {
    if (rows.empty()) {
        throw ConfigError("loss: empty node mask");
    }
    const Matrix<T>& z = t.value(logits);
    if (targets.cols() != z.cols() || targets.rows() < z.rows()) {
        throw ShapeError("loss: targets " + shape_str(targets) + " vs logits " + shape_str(z));
    }
    std::vector<NodeId> mask(rows.begin(), rows.end());
    Matrix<float> y(rows.size(), z.cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto u = static_cast<std::size_t>(rows[i]);
        if (u >= z.rows()) {
            throw ShapeError("loss: row index out of range");
        }
        for (std::size_t k = 0; k < z.cols(); ++k) {
            const double zv = static_cast<double>(z(u, k));
            const double yv = targets(u, k);
            y(i, k) = targets(u, k);
            loss += std::max(zv, 0.0) - yv * zv + std::log1p(std::exp(-std::abs(zv)));
        }
    }
    const double inv = 1.0 / (static_cast<double>(rows.size()) * static_cast<double>(z.cols()));
    return t.record(Matrix<T>(1, 1, static_cast<T>(loss * inv)), {logits},
                    [logits, mask = std::move(mask), y = std::move(y), inv](Tape<T>& tp,
                                                                           std::size_t self) {
                        const Matrix<T>& z = tp.value(logits);
                        const double g = static_cast<double>(tp.grad_of(self)(0, 0)) * inv;
                        Matrix<T> gz(z.rows(), z.cols());
                        for (std::size_t i = 0; i < mask.size(); ++i) {
                            const auto u = static_cast<std::size_t>(mask[i]);
                            for (std::size_t k = 0; k < z.cols(); ++k) {
                                const double s =
                                    1.0 / (1.0 + std::exp(-static_cast<double>(z(u, k))));
                                gz(u, k) += static_cast<T>(g * (s - y(i, k)));
                            }
                        }
                        tp.accumulate(logits, std::move(gz));
                    });
}

#define SGF_INSTANTIATE(T)                                                                   \
    template Var matmul(Tape<T>&, Var, Var);                                                 \
    template Var matmul_nt(Tape<T>&, Var, Var);                                              \
    template Var matmul_tn(Tape<T>&, Var, Var);                                              \
    template Var linear(Tape<T>&, Var, Var, Var);                                            \
    template Var add(Tape<T>&, Var, Var);                                                    \
    template Var sub(Tape<T>&, Var, Var);                                                    \
    template Var scale(Tape<T>&, Var, T);                                                    \
    template Var hadamard(Tape<T>&, Var, Var);                                               \
    template Var relu(Tape<T>&, Var);                                                        \
    template Var add_row(Tape<T>&, Var, Var);                                                \
    template Var rowdiv(Tape<T>&, Var, Var);                                                 \
    template Var div_scalar(Tape<T>&, Var, Var);                                             \
    template Var row_sum(Tape<T>&, Var);                                                     \
    template Var col_sum(Tape<T>&, Var);                                                     \
    template Var sum(Tape<T>&, Var);                                                         \
    template Var frobenius_norm(Tape<T>&, Var);                                              \
    template Var spmm(Tape<T>&, const SparseGraph&, Var);                                    \
    template Var dropout(Tape<T>&, Var, double, std::mt19937_64&);                           \
    template Var softmax_cross_entropy(Tape<T>&, Var, std::span<const std::int32_t>,         \
                                       std::span<const NodeId>);                             \
    template Var sigmoid_bce(Tape<T>&, Var, const Matrix<float>&, std::span<const NodeId>);

SGF_INSTANTIATE(float)
SGF_INSTANTIATE(double)
#undef SGF_INSTANTIATE

} // namespace sgf::ad
