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
#include <sgf/energy.hpp>
#include <sgf/error.hpp>
#include <sgf/gradcheck.hpp>
#include <sgf/graph.hpp>
#include <sgf/kernels.hpp>
#include <sgf/sbm.hpp>

#include <cmath>
#include <random>

namespace sgf::energy {

using kernels::matmul;
using M = Matrix<double>;

namespace {

void require_square(const M& m, std::size_t n, const char* what) {
    if (m.rows() != n || m.cols() != n) {
        throw ShapeError(std::string("energy: ") + what + " must be " + std::to_string(n) + "x" +
                         std::to_string(n) + ", got " + shape_str(m));
    }
}

M scaled(const M& a, double c) {
    M out = a;
    for (double& v : out.flat()) {
        v *= c;
    }
    return out;
}

M plus(const M& a, const M& b, double cb = 1.0) {
    M out = a;
    kernels::axpy(cb, b, out);
    return out;
}

double max_abs(const M& a, const M& b) { return kernels::max_abs_diff(a, b); }

M symmetric_part(const M& a) { return scaled(plus(a, kernels::transpose(a)), 0.5); }

M random_symmetric(std::size_t d, std::mt19937_64& rng) {
    return scaled(symmetric_part(random_normal<double>(d, d, rng)),
                  1.0 / std::sqrt(static_cast<double>(d)));
}

M power(const M& a, std::size_t k) {
    M out = M::identity(a.rows());
    for (std::size_t i = 0; i < k; ++i) {
        out = matmul(a, out);
    }
    return out;
}

double pair_factor(PairSum p) { return p == PairSum::Ordered ? 1.0 : 0.5; }

} // namespace

M EnergySpec::propagation() const {
    if (!hybrid) {
        return p;
    }
    return plus(scaled(p_a, 1.0 - alpha), p_g, alpha);
}

void EnergySpec::validate() const {
    const std::size_t n = z_ref.rows();
    const std::size_t d = z_ref.cols();
    if (n == 0 || d == 0) {
        throw ShapeError("energy: empty anchor embeddings");
    }
    if (n > kEnergyMaxNodes) {
        throw ConfigError("energy: N is capped at " + std::to_string(kEnergyMaxNodes));
    }
    require_square(w, d, "W");
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (std::abs(w(i, j) - w(j, i)) > 1e-14) {
                throw ConfigError("energy: W is not symmetric");
            }
        }
    }
    if (!(beta >= 0.0)) {
        throw ConfigError("energy: beta must be >= 0");
    }
    if (hybrid) {
        require_square(p_a, n, "P_A");
        require_square(p_g, n, "P_G");
        if (!(alpha >= 0.0 && alpha <= 1.0)) {
            throw ConfigError("energy: alpha must be in [0, 1]");
        }
    } else {
        require_square(p, n, "P");
    }
    for (const M* m : {&p, &p_a, &p_g}) {
        for (double v : m->flat()) {
            if (!std::isfinite(v)) {
                throw NumericError("energy: non-finite propagation entry");
            }
        }
    }
}

double energy_eval(const EnergySpec& s, const M& z) {
    s.validate();
    if (!z.same_shape(s.z_ref)) {
        throw ShapeError("energy: Z " + shape_str(z) + " vs anchor " + shape_str(s.z_ref));
    }
    const std::size_t n = z.rows();
    const std::size_t d = z.cols();
    // q_uv = (z_u - z_v)^T W (z_u - z_v) = G_uu + G_vv - 2 G_uv with G = Z W Z^T.
    const M zw = matmul(z, s.w);
    const M g = kernels::gemm(zw, kernels::Trans::No, z, kernels::Trans::Yes);
    const double f = pair_factor(s.pairs);

    double smooth = 0.0;
    std::vector<double> deg(n, 0.0);
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 0; v < n; ++v) {
            const double q = g(u, u) + g(v, v) - 2.0 * g(u, v);
            if (s.hybrid) {
                const double c = s.p_a(u, v);
                const double w = s.p_g(u, v);
                smooth += f * ((1.0 - s.alpha) * c * q + s.alpha * w * q);
                deg[u] += (1.0 - s.alpha) * c + s.alpha * w;
            } else {
                smooth += f * s.p(u, v) * q;
                deg[u] += s.p(u, v);
            }
        }
    }
    const M rw = matmul(s.z_ref, s.w); // row u is (W z_ref_u)^T since W is symmetric
    double fid = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
        const double c = s.beta + deg[u];
        for (std::size_t j = 0; j < d; ++j) {
            const double r = z(u, j) - c * rw(u, j);
            fid += r * r;
        }
    }
    return smooth + fid;
}

M energy_grad(const EnergySpec& s, const M& z) {
    s.validate();
    if (!z.same_shape(s.z_ref)) {
        throw ShapeError("energy: Z " + shape_str(z) + " vs anchor " + shape_str(s.z_ref));
    }
    const std::size_t n = z.rows();
    const M p = s.propagation();
    // Smoothness: 2 f [(D_row + D_col) - (P + P^T)] Z W.
    M lap(n, n);
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 0; v < n; ++v) {
            lap(u, u) += p(u, v);
            lap(v, v) += p(u, v);
            lap(u, v) -= p(u, v);
            lap(v, u) -= p(u, v);
        }
    }
    M grad = scaled(matmul(matmul(lap, z), s.w), 2.0 * pair_factor(s.pairs));
    // Fidelity: 2 (Z - diag(beta + d) Z_ref W).
    const M rw = matmul(s.z_ref, s.w);
    for (std::size_t u = 0; u < n; ++u) {
        double deg = s.beta;
        for (std::size_t v = 0; v < n; ++v) {
            deg += p(u, v);
        }
        for (std::size_t j = 0; j < z.cols(); ++j) {
            grad(u, j) += 2.0 * (z(u, j) - deg * rw(u, j));
        }
    }
    return grad;
}

M energy_grad_closed_form(const EnergySpec& s) {
    s.validate();
    const M zw = matmul(s.z_ref, s.w);
    M out = scaled(s.z_ref, 2.0);
    kernels::axpy(-2.0 * s.beta, zw, out);
    kernels::axpy(-2.0, matmul(s.propagation(), zw), out);
    return out;
}

M propagation_update(const EnergySpec& s) {
    s.validate();
    const M zw = matmul(s.z_ref, s.w);
    M out = matmul(s.propagation(), zw);
    kernels::axpy(s.beta, zw, out);
    return out;
}

DescentReport check_descent(const EnergySpec& s) {
    s.validate();
    DescentReport r;
    r.n = s.z_ref.rows();
    r.d = s.z_ref.cols();
    r.beta = s.beta;
    r.alpha = s.hybrid ? s.alpha : 0.0;

    const M update = propagation_update(s);
    const M grad = energy_grad(s, s.z_ref);
    const M cf = energy_grad_closed_form(s);
    r.update_residual = max_abs(update, plus(s.z_ref, grad, -0.5));
    r.closed_form_residual = max_abs(update, plus(s.z_ref, cf, -0.5));

    const M fd = finite_difference([&](const M& z) { return energy_eval(s, z); }, s.z_ref, 1e-6);
    r.grad_vs_fd = max_relative_error(grad, fd);
    r.closed_form_vs_fd = max_relative_error(cf, fd);

    const double e0 = energy_eval(s, s.z_ref);
    double step = 0.5;
    for (int i = 0; i < 60; ++i, step *= 0.5) {
        if (energy_eval(s, plus(s.z_ref, grad, -step)) < e0) {
            r.descent_step = step;
            r.half_step_descends = i == 0;
            break;
        }
    }
    return r;
}

DescentReport verify_descent_step(std::size_t n, std::size_t d, double beta, std::uint64_t seed,
                              const DescentOptions& opts) {
    std::mt19937_64 rng(seed);
    EnergySpec s;
    s.z_ref = random_normal<double>(n, d, rng);
    s.w = random_symmetric(d, rng);
    s.p = random_uniform<double>(n, n, rng, 0.0, 1.0 / static_cast<double>(n));
    if (opts.symmetric_p) {
        s.p = symmetric_part(s.p);
    }
    s.beta = beta;
    s.pairs = opts.pairs;
    return check_descent(s);
}

DescentReport verify_hybrid_descent_step(std::size_t n, std::size_t d, double alpha, double beta,
                                std::uint64_t seed, const DescentOptions& opts) {
    if (n < 2) {
        throw ConfigError("hybrid_descent_step: need N >= 2");
    }
    std::mt19937_64 rng(seed);
    EnergySpec s;
    s.z_ref = random_normal<double>(n, d, rng);
    s.w = random_symmetric(d, rng);
    const double inv = 1.0 / std::sqrt(static_cast<double>(d));
    const M wq = scaled(random_normal<double>(d, d, rng), inv);
    const M wk = scaled(random_normal<double>(d, d, rng), inv);
    s.p_a = attention_explicit(matmul(s.z_ref, wq), matmul(s.z_ref, wk), s.z_ref).c;
    if (opts.symmetric_p) {
        s.p_a = symmetric_part(s.p_a);
    }
    s.p_g = normalize_gcn(random_graph(n, 3.0, seed)).to_dense();
    s.hybrid = true;
    s.alpha = alpha;
    s.beta = beta;
    s.pairs = opts.pairs;
    return check_descent(s);
}

LinearStack build_linear_stack(std::size_t k, std::size_t n, std::size_t d, double alpha,
                               double beta, std::uint64_t seed) {
    if (k < 1) {
        throw ConfigError("stack: K must be >= 1");
    }
    if (n < 2 || n > kEnergyMaxNodes || d < 1) {
        throw ConfigError("stack: need 2 <= N <= " + std::to_string(kEnergyMaxNodes) +
                          " and d >= 1");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0) || !(beta >= 0.0)) {
        throw ConfigError("stack: need alpha in [0, 1] and beta >= 0");
    }
    std::mt19937_64 rng(seed);
    LinearStack s;
    s.alpha = alpha;
    s.p_g = normalize_gcn(random_graph(n, 3.0, seed)).to_dense();
    s.z.push_back(random_normal<double>(n, d, rng));
    const double inv = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t layer = 0; layer < k; ++layer) {
        const M& zk = s.z.back();
        const M wq = scaled(random_normal<double>(d, d, rng), inv);
        const M wk = scaled(random_normal<double>(d, d, rng), inv);
        const M c = attention_explicit(matmul(zk, wq), matmul(zk, wk), zk).c;
        M pbar = plus(scaled(c, 1.0 - alpha), s.p_g, alpha);
        for (std::size_t u = 0; u < n; ++u) {
            pbar(u, u) += beta;
        }
        s.p_bar.push_back(std::move(pbar));
        s.w.push_back(scaled(random_normal<double>(d, d, rng), inv));
        s.z.push_back(matmul(matmul(s.p_bar.back(), zk), s.w.back()));
    }
    return s;
}

void propagate(LinearStack& s) {
    if (s.z.empty() || s.p_bar.size() != s.w.size()) {
        throw ShapeError("stack: inconsistent layers");
    }
    s.z.resize(1);
    for (std::size_t k = 0; k < s.p_bar.size(); ++k) {
        s.z.push_back(matmul(matmul(s.p_bar[k], s.z[k]), s.w[k]));
    }
}

ReductionReport check_onelayer_reduction(const LinearStack& s) {
    if (!(s.alpha >= 0.0 && s.alpha < 1.0)) {
        throw ConfigError("reduction: alpha must be in [0, 1); 1 - alpha is a divisor");
    }
    const std::size_t k = s.p_bar.size();
    if (k == 0 || s.w.size() != k || s.z.size() != k + 1) {
        throw ShapeError("reduction: stack is not propagated");
    }
    ReductionReport r;
    r.k = k;
    r.n = s.z[0].rows();
    r.d = s.z[0].cols();
    r.alpha = s.alpha;

    M pbar_star = s.p_bar[0];
    for (std::size_t i = 1; i < k; ++i) {
        pbar_star = matmul(s.p_bar[i], pbar_star);
    }
    M w_star = s.w[0];
    for (std::size_t i = 1; i < k; ++i) {
        w_star = matmul(w_star, s.w[i]);
    }
    const M& zk = s.z.back();
    r.product_residual = max_abs(matmul(matmul(pbar_star, s.z[0]), w_star), zk);

    const M pg_star = power(s.p_g, k);
    const M pa_star = scaled(plus(pbar_star, pg_star, -s.alpha), 1.0 / (1.0 - s.alpha));
    const M z0w = matmul(s.z[0], w_star);
    const M z_one = plus(scaled(matmul(pa_star, z0w), 1.0 - s.alpha), matmul(pg_star, z0w),
                         s.alpha);
    r.onelayer_residual = max_abs(z_one, zk);
    return r;
}

ReductionReport verify_onelayer_reduction(std::size_t k, std::size_t n, std::size_t d,
                                          double alpha, std::uint64_t seed, double beta) {
    if (!(alpha < 1.0)) {
        throw ConfigError("reduction: alpha must be in [0, 1); 1 - alpha is a divisor");
    }
    return check_onelayer_reduction(build_linear_stack(k, n, d, alpha, beta, seed));
}

} // namespace sgf::energy
