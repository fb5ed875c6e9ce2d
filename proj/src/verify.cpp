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

#include <sgf/energy.hpp>
#include <sgf/error.hpp>
#include <sgf/gradcheck.hpp>
#include <sgf/model.hpp>
#include <sgf/ops.hpp>
#include <sgf/sbm.hpp>
#include <sgf/verify.hpp>

#include <algorithm>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

namespace sgf {

namespace {

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Runs one trial; exceptions count as a failure with the message recorded.
bool guarded(VerifyGroup& g, const std::string& label, const std::function<bool()>& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        g.lines.push_back(label + ": error: " + e.what());
        return false;
    }
}

VerifyGroup attention_equivalence(const VerifyOptions& o) {
    VerifyGroup g{"attention_equivalence", true, {}};
    std::mt19937_64 rng(o.seed ^ 0xa11e);
    std::uniform_int_distribution<std::size_t> nd(2, 512);
    std::uniform_int_distribution<std::size_t> dd(1, 64);
    double worst64 = 0.0;
    double worst32 = 0.0;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < o.trials; ++i) {
        const std::size_t n = nd(rng);
        const std::size_t d = dd(rng);
        const auto q = random_normal<double>(n, d, rng);
        const auto k = random_normal<double>(n, d, rng);
        const auto v = random_normal<double>(n, d, rng);
        const std::string label = fmt("trial %zu (N=%zu d=%zu)", i, n, d);
        const bool ok = guarded(g, label, [&] {
            const AttentionOptions ao{o.scale};
            const double e64 = max_relative_error(attention_linear(q, k, v, ao),
                                                  attention_explicit(q, k, v).z);
            const auto qf = Matrix<float>::cast_from(q);
            const auto kf = Matrix<float>::cast_from(k);
            const auto vf = Matrix<float>::cast_from(v);
            const double e32 = max_relative_error(attention_linear(qf, kf, vf, ao),
                                                  attention_explicit(qf, kf, vf).z);
            worst64 = std::max(worst64, e64);
            worst32 = std::max(worst32, e32);
            const bool pass = e64 <= 1e-10 && e32 <= 1e-4;
            if (!pass) {
                g.lines.push_back(fmt("%s: f64 %.3e f32 %.3e", label.c_str(), e64, e32));
            }
            return pass;
        });
        failed += ok ? 0 : 1;
    }
    g.pass = failed == 0;
    g.lines.insert(g.lines.begin(),
                   fmt("trials=%zu failed=%zu max_rel_f64=%.3e (tol 1e-10) max_rel_f32=%.3e "
                       "(tol 1e-4)",
                       o.trials, failed, worst64, worst32));
    return g;
}

VerifyGroup attention_gradients(const VerifyOptions& o) {
    VerifyGroup g{"attention_gradients", true, {}};
    std::mt19937_64 rng(o.seed ^ 0x96ad);
    std::uniform_int_distribution<std::size_t> nd(2, 32);
    std::uniform_int_distribution<std::size_t> dd(1, 8);
    double worst_ex = 0.0;
    double worst_fd = 0.0;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < o.trials; ++i) {
        const std::size_t n = nd(rng);
        const std::size_t d = dd(rng);
        const auto q = random_normal<double>(n, d, rng);
        const auto k = random_normal<double>(n, d, rng);
        const auto v = random_normal<double>(n, d, rng);
        const std::string label = fmt("trial %zu (N=%zu d=%zu)", i, n, d);
        const bool ok = guarded(g, label, [&] {
            const auto r = attention_backward_check(q, k, v, AttentionOptions{o.scale});
            worst_ex = std::max(worst_ex, r.vs_explicit);
            worst_fd = std::max(worst_fd, r.vs_finite_diff);
            if (!r.ok()) {
                g.lines.push_back(fmt("%s: vs explicit %.3e vs fd %.3e", label.c_str(),
                                      r.vs_explicit, r.vs_finite_diff));
            }
            return r.ok();
        });
        failed += ok ? 0 : 1;
    }
    g.pass = failed == 0;
    g.lines.insert(g.lines.begin(),
                   fmt("trials=%zu failed=%zu vs_explicit=%.3e (tol 1e-9) vs_fd=%.3e (tol 1e-5)",
                       o.trials, failed, worst_ex, worst_fd));
    return g;
}

// Descent groups run on the halved pair sum with symmetric propagation,
// the form under which the closed-form gradient is exact.
VerifyGroup descent_group(const VerifyOptions& o, bool hybrid) {
    VerifyGroup g{hybrid ? "hybrid_descent_step" : "descent_step", true, {}};
    std::mt19937_64 rng(o.seed ^ (hybrid ? 0xc0c1u : 0x7e01u));
    std::uniform_int_distribution<std::size_t> nd(2, 64);
    std::uniform_int_distribution<std::size_t> dd(1, 8);
    const double betas[] = {0.0, 0.5, 1.0};
    const double alphas[] = {0.0, 0.3, 0.8};
    const energy::DescentOptions topt{energy::PairSum::Halved, true};
    double worst_eq = 0.0;
    double worst_fd = 0.0;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < o.trials; ++i) {
        const std::size_t n = nd(rng);
        const std::size_t d = dd(rng);
        const double beta = betas[i % 3];
        const double alpha = alphas[(i / 3) % 3];
        const std::uint64_t s = rng();
        const std::string label =
            hybrid ? fmt("trial %zu (N=%zu d=%zu beta=%.1f alpha=%.1f)", i, n, d, beta, alpha)
                   : fmt("trial %zu (N=%zu d=%zu beta=%.1f)", i, n, d, beta);
        const bool ok = guarded(g, label, [&] {
            const auto r = hybrid ? energy::verify_hybrid_descent_step(n, d, alpha, beta, s, topt)
                                  : energy::verify_descent_step(n, d, beta, s, topt);
            worst_eq = std::max(worst_eq, r.update_residual);
            worst_fd = std::max(worst_fd, r.grad_vs_fd);
            const bool pass = r.ok() && r.descent_step > 0.0;
            if (!pass) {
                g.lines.push_back(fmt("%s: residual %.3e fd %.3e descent %g", label.c_str(),
                                      r.update_residual, r.grad_vs_fd, r.descent_step));
            }
            return pass;
        });
        failed += ok ? 0 : 1;
    }
    g.pass = failed == 0;
    g.lines.insert(g.lines.begin(),
                   fmt("trials=%zu failed=%zu max_residual=%.3e (tol 1e-8) max_grad_vs_fd=%.3e "
                       "(tol 1e-5)",
                       o.trials, failed, worst_eq, worst_fd));
    return g;
}

VerifyGroup reduction_group(const VerifyOptions& o) {
    VerifyGroup g{"onelayer_reduction", true, {}};
    std::mt19937_64 rng(o.seed ^ 0x2ed0);
    std::uniform_int_distribution<std::size_t> nd(2, 128);
    std::uniform_int_distribution<std::size_t> dd(1, 8);
    const double alphas[] = {0.0, 0.3, 0.5, 0.8};
    double worst = 0.0;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < o.trials; ++i) {
        const std::size_t k = 2 + i % 3;
        const std::size_t n = nd(rng);
        const std::size_t d = dd(rng);
        const double alpha = alphas[i % 4];
        const std::uint64_t s = rng();
        const std::string label = fmt("trial %zu (K=%zu N=%zu d=%zu alpha=%.1f)", i, k, n, d,
                                      alpha);
        const bool ok = guarded(g, label, [&] {
            const auto r = energy::verify_onelayer_reduction(k, n, d, alpha, s);
            worst = std::max({worst, r.product_residual, r.onelayer_residual});
            if (!r.ok()) {
                g.lines.push_back(fmt("%s: product %.3e one-layer %.3e", label.c_str(),
                                      r.product_residual, r.onelayer_residual));
            }
            return r.ok();
        });
        failed += ok ? 0 : 1;
    }
    g.pass = failed == 0;
    g.lines.insert(g.lines.begin(),
                   fmt("trials=%zu failed=%zu max_residual=%.3e (tol 1e-8); scope: linear "
                       "stacks, no nonlinearity between layers",
                       o.trials, failed, worst));
    return g;
}

VerifyGroup model_group(const VerifyOptions& o) {
    VerifyGroup g{"model_gradients", true, {}};
    ModelGradOptions mo;
    mo.seed = o.seed;
    mo.attention.scale = o.scale;
    guarded(g, "model", [&] {
        double worst = 0.0;
        for (const auto& e : model_gradient_check(mo)) {
            worst = std::max(worst, e.rel_error);
            const bool pass = e.rel_error <= 1e-4;
            g.pass = g.pass && pass;
            g.lines.push_back(fmt("%-8s n=%-4zu rel_err=%.3e %s", e.name.c_str(), e.size,
                                  e.rel_error, pass ? "ok" : "FAIL"));
        }
        g.lines.insert(g.lines.begin(), fmt("N=%zu float64, tol 1e-4, max_rel_err=%.3e",
                                            mo.nodes, worst));
        return g.pass;
    }) || (g.pass = false);
    return g;
}

} // namespace

std::vector<TensorGradError> model_gradient_check(const ModelGradOptions& opts) {
    SbmOptions so;
    so.nodes = opts.nodes;
    so.classes = opts.classes;
    so.p_in = 0.4;
    so.p_out = 0.1;
    so.feat_dim = opts.feat_dim;
    so.seed = opts.seed;
    const NodeDataset ds = generate_sbm(so);
    const SparseGraph g = normalize_gcn(ds.graph);
    const auto x = Matrix<double>::cast_from(ds.features);

    ModelConfig mc;
    mc.in_dim = opts.feat_dim;
    mc.hidden = opts.hidden;
    mc.out_dim = opts.classes;
    mc.gcn_depth = opts.gcn_depth;
    mc.alpha = opts.alpha;
    mc.dropout = opts.dropout;
    SgformerParams<double> params = init_params<double>(mc, opts.seed);
    // Nonzero biases so their paths are exercised.
    std::mt19937_64 brng(opts.seed + 1);
    for (Matrix<double>* b : {&params.b_in, &params.b_q, &params.b_k, &params.b_v,
                              &params.b_out}) {
        *b = random_normal<double>(b->rows(), b->cols(), brng, 0.1);
    }
    for (auto& b : params.gcn.biases) {
        b = random_normal<double>(b.rows(), b.cols(), brng, 0.1);
    }

    ForwardOptions fo;
    fo.training = opts.dropout > 0.0;
    fo.attention = opts.attention;
    const std::uint64_t mask_seed = opts.seed ^ 0xd50f;
    auto record = [&](ad::Tape<double>& t, const SgformerParams<double>& p, bool track) {
        std::mt19937_64 rng(mask_seed);
        auto fv = forward(t, p, g, x, fo, &rng, track);
        const ad::Var loss = ad::softmax_cross_entropy(t, fv.logits,
                                                       std::span(ds.labels.classes),
                                                       std::span(ds.split.train));
        return std::pair{fv, loss};
    };

    ad::Tape<double> tape;
    auto [fv, loss] = record(tape, params, true);
    const auto grads = tape.backward(loss, fv.params);

    std::vector<TensorGradError> out;
    const auto names = params.tensor_names();
    SgformerParams<double> probe = params;
    const auto ptrs = probe.tensors();
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
        Matrix<double>& m = *ptrs[i];
        Matrix<double> fd(m.rows(), m.cols());
        for (std::size_t j = 0; j < m.size(); ++j) {
            const double orig = m.data()[j];
            auto eval = [&](double val) {
                m.data()[j] = val;
                ad::Tape<double> t;
                const auto r = record(t, probe, false);
                return t.value(r.second)(0, 0);
            };
            const double fp = eval(orig + opts.h);
            const double fm = eval(orig - opts.h);
            m.data()[j] = orig;
            fd.data()[j] = (fp - fm) / (2.0 * opts.h);
        }
        out.push_back({names[i], m.size(), max_relative_error(grads[i], fd)});
    }
    return out;
}

bool VerifyReport::ok() const {
    return std::all_of(groups.begin(), groups.end(), [](const VerifyGroup& g) { return g.pass; });
}

std::string VerifyReport::text() const {
    std::ostringstream os;
    std::size_t passed = 0;
    for (const auto& g : groups) {
        os << (g.pass ? "[PASS] " : "[FAIL] ") << g.name << '\n';
        for (const auto& l : g.lines) {
            os << "    " << l << '\n';
        }
        passed += g.pass ? 1 : 0;
    }
    for (const auto& l : info) {
        os << "[INFO] " << l << '\n';
    }
    os << "verify: " << passed << "/" << groups.size() << " groups passed\n";
    return os.str();
}

VerifyReport run_verify(const VerifyOptions& opts) {
    if (opts.trials == 0) {
        throw ConfigError("verify: --trials must be >= 1");
    }
    VerifyReport r;
    r.groups.push_back(attention_equivalence(opts));
    r.groups.push_back(attention_gradients(opts));
    r.groups.push_back(descent_group(opts, false));
    r.groups.push_back(descent_group(opts, true));
    r.groups.push_back(reduction_group(opts));
    r.groups.push_back(model_group(opts));

    // The energy exactly as written (ordered pairs, asymmetric P).
    const auto lit = energy::verify_descent_step(16, 4, 0.5, opts.seed);
    const auto hyb = energy::verify_hybrid_descent_step(16, 4, 0.5, 0.5, opts.seed);
    r.info.push_back(fmt("ordered-pair energy, asymmetric P: update residual %.3e, "
                         "closed-form gradient vs fd %.3e (the update is a descent step only "
                         "for the halved energy with symmetric P)",
                         lit.update_residual, lit.closed_form_vs_fd));
    r.info.push_back(fmt("ordered-pair hybrid energy, attention P_A: update residual %.3e",
                         hyb.update_residual));
    return r;
}

} // namespace sgf
