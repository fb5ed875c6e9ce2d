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

#include <sgf/alloc_stats.hpp>
#include <sgf/bench.hpp>
#include <sgf/error.hpp>
#include <sgf/gradcheck.hpp>
#include <sgf/model.hpp>
#include <sgf/ops.hpp>
#include <sgf/sbm.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <new>
#include <sstream>

namespace sgf {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct Workload {
    SparseGraph g;
    Matrix<float> x;
    std::vector<std::int32_t> labels;
    std::vector<NodeId> rows;
    SgformerParams<float> params;
};

Workload make_workload(std::size_t n, const ScalingOptions& o) {
    Workload w;
    w.g = normalize_gcn(random_graph(n, o.avg_degree, o.seed + n));
    std::mt19937_64 rng(o.seed ^ n);
    w.x = random_normal<float>(n, o.feat_dim, rng);
    std::uniform_int_distribution<std::int32_t> cls(0, static_cast<std::int32_t>(o.classes) - 1);
    w.labels.resize(n);
    w.rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        w.labels[i] = cls(rng);
        w.rows[i] = static_cast<NodeId>(i);
    }
    ModelConfig mc;
    mc.in_dim = o.feat_dim;
    mc.hidden = o.hidden;
    mc.out_dim = o.classes;
    w.params = init_params<float>(mc, o.seed);
    return w;
}

void pass(const Workload& w, AttentionVariant variant, bool backward) {
    ad::Tape<float> t;
    ForwardOptions fo;
    fo.variant = variant;
    const auto fv = forward(t, w.params, w.g, w.x, fo, nullptr, backward);
    if (backward) {
        const ad::Var loss = ad::softmax_cross_entropy(t, fv.logits, std::span(w.labels),
                                                       std::span(w.rows));
        t.backward(loss, fv.params);
    }
}

BenchPoint measure(const Workload& w, std::size_t e, AttentionVariant variant,
                   const ScalingOptions& o) {
    BenchPoint p;
    p.n = w.x.rows();
    p.e = e;
    p.variant = variant == AttentionVariant::Linear ? "linear" : "explicit";
    p.repeats = o.repeats;
    try {
        ScopedAllocBudget budget(o.memory_budget);
        // Warm-up; also the (deterministic) memory measurement.
        AllocStats::reset_peak();
        const std::size_t base = AllocStats::current_bytes();
        pass(w, variant, true);
        p.peak_bytes = AllocStats::peak_bytes() - base;
        if (o.timing) {
            std::vector<double> fwd;
            std::vector<double> both;
            for (std::size_t r = 0; r < o.repeats; ++r) {
                auto t0 = Clock::now();
                pass(w, variant, false);
                fwd.push_back(ms_since(t0));
                t0 = Clock::now();
                pass(w, variant, true);
                both.push_back(ms_since(t0));
            }
            p.fwd_ms = median(fwd);
            p.fwd_bwd_ms = median(both);
        }
    } catch (const std::bad_alloc&) {
        p = BenchPoint{p.n, p.e, p.variant, 0.0, 0.0, 0, p.repeats, true};
    }
    return p;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

} // namespace

void ScalingOptions::validate() const {
    if (n_values.empty()) {
        throw ConfigError("bench: no sizes");
    }
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        if (n_values[i] < 2 || (i > 0 && n_values[i] <= n_values[i - 1])) {
            throw ConfigError("bench: sizes must be >= 2 and strictly increasing");
        }
    }
    if (!(avg_degree > 0.0) || hidden == 0 || feat_dim == 0 || classes < 2) {
        throw ConfigError("bench: need avg_degree > 0, hidden >= 1, feat_dim >= 1, classes >= 2");
    }
    if (repeats < 3) {
        throw ConfigError("bench: repeats must be >= 3");
    }
}

std::vector<BenchPoint> run_scaling(const ScalingOptions& opts) {
    opts.validate();
    std::vector<BenchPoint> out;
    for (std::size_t n : opts.n_values) {
        const Workload w = make_workload(n, opts);
        const std::size_t e = random_graph(n, opts.avg_degree, opts.seed + n).num_undirected_edges();
        out.push_back(measure(w, e, AttentionVariant::Linear, opts));
        if (n <= opts.explicit_cap) {
            out.push_back(measure(w, e, AttentionVariant::Explicit, opts));
        }
    }
    return out;
}

std::vector<std::size_t> bench_sizes(std::size_t min_n, std::size_t max_n, std::size_t steps) {
    if (steps == 0 || min_n < 2 || max_n < min_n || (steps > 1 && max_n == min_n)) {
        throw ConfigError("bench: need steps >= 1, 2 <= min-n <= max-n (min < max when steps > 1)");
    }
    if (steps == 1) {
        return {min_n};
    }
    std::vector<std::size_t> v;
    const double span = static_cast<double>(max_n - min_n);
    for (std::size_t i = 0; i < steps; ++i) {
        const auto n = min_n + static_cast<std::size_t>(
                                   std::llround(span * static_cast<double>(i) /
                                                static_cast<double>(steps - 1)));
        if (v.empty() || n > v.back()) {
            v.push_back(n);
        }
    }
    return v;
}

std::string bench_csv(const std::vector<BenchPoint>& points) {
    std::ostringstream os;
    os << kBenchHeader << '\n';
    for (const auto& p : points) {
        os << p.n << ',' << p.e << ',' << p.variant << ',';
        if (p.oom) {
            os << "OOM,OOM,OOM";
        } else {
            os << num(p.fwd_ms) << ',' << num(p.fwd_bwd_ms) << ',' << p.peak_bytes;
        }
        os << ',' << p.repeats << '\n';
    }
    return os.str();
}

void emit_csv(const std::vector<BenchPoint>& points, const std::filesystem::path& path) {
    if (points.empty()) {
        throw ConfigError("bench: nothing to write");
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw Error("bench: cannot write " + path.string());
    }
    f << bench_csv(points);
    if (!f.flush()) {
        throw Error("bench: write failed for " + path.string());
    }
}

std::vector<BenchPoint> parse_bench_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != kBenchHeader) {
        throw FormatError("bench csv: bad header");
    }
    std::vector<BenchPoint> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) {
            f.push_back(cell);
        }
        if (f.size() != 7) {
            throw FormatError("bench csv: line " + std::to_string(lineno) + " has " +
                              std::to_string(f.size()) + " fields");
        }
        try {
            BenchPoint p;
            p.n = std::stoull(f[0]);
            p.e = std::stoull(f[1]);
            p.variant = f[2];
            p.oom = f[3] == "OOM";
            if (!p.oom) {
                p.fwd_ms = std::stod(f[3]);
                p.fwd_bwd_ms = std::stod(f[4]);
                p.peak_bytes = std::stoull(f[5]);
            }
            p.repeats = std::stoull(f[6]);
            out.push_back(std::move(p));
        } catch (const std::logic_error&) {
            throw FormatError("bench csv: bad number on line " + std::to_string(lineno));
        }
    }
    return out;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ConfigError("linear_fit: need >= 2 paired points");
    }
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) {
        throw ConfigError("linear_fit: x values are all equal");
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
    return f;
}

} // namespace sgf
