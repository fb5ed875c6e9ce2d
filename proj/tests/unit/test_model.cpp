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

#include <doctest.h>

#include <sgf/gradcheck.hpp>
#include <sgf/kernels.hpp>
#include <sgf/model.hpp>
#include <sgf/sbm.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

using namespace sgf;
using M = Matrix<double>;

namespace {

struct Fixture {
    NodeDataset ds;
    SparseGraph g;
    M x;
    ModelConfig mc;
};

Fixture make_fixture(std::size_t n = 30, std::uint64_t seed = 3) {
    SbmOptions so;
    so.nodes = n;
    so.classes = 3;
    so.p_in = 0.3;
    so.p_out = 0.05;
    so.feat_dim = 5;
    so.seed = seed;
    Fixture f;
    f.ds = generate_sbm(so);
    f.g = normalize_gcn(f.ds.graph);
    f.x = M::cast_from(f.ds.features);
    f.mc.in_dim = 5;
    f.mc.hidden = 6;
    f.mc.out_dim = 3;
    return f;
}

template <typename T>
SgformerParams<T> with_random_biases(SgformerParams<T> p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto* m : p.tensors()) {
        if (m->rows() == 1) {
            *m = random_normal<T>(1, m->cols(), rng, 0.2);
        }
    }
    return p;
}

struct Branches {
    M attn, gcn, out, logits;
};

Branches run(const SgformerParams<double>& p, const SparseGraph& g, const M& x) {
    ad::Tape<double> t;
    const auto fv = forward(t, p, g, x, ForwardOptions{}, nullptr, false);
    return {t.value(fv.z_attn), t.value(fv.z_gcn), t.value(fv.z_out), t.value(fv.logits)};
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("sgf_model_" + name);
}

std::vector<char> read_bytes(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

void write_bytes(const std::filesystem::path& p, const std::vector<char>& b) {
    std::ofstream f(p, std::ios::binary);
    f.write(b.data(), static_cast<std::streamsize>(b.size()));
}

} // namespace

TEST_CASE("alpha selects and mixes the two branches") {
    auto f = make_fixture();
    f.mc.alpha = 0.0;
    auto p = with_random_biases(init_params<double>(f.mc, 1), 2);
    const Branches a0 = run(p, f.g, f.x);
    CHECK(kernels::max_abs_diff(a0.out, a0.attn) == 0.0);

    p.config.alpha = 1.0;
    const Branches a1 = run(p, f.g, f.x);
    CHECK(kernels::max_abs_diff(a1.out, a1.gcn) == 0.0);
    // Branches themselves do not depend on alpha.
    CHECK(kernels::max_abs_diff(a0.attn, a1.attn) == 0.0);
    CHECK(kernels::max_abs_diff(a0.gcn, a1.gcn) == 0.0);

    // Logits are affine in alpha: l(a) = (1 - a) l(0) + a l(1).
    for (double alpha : {0.25, 0.5, 0.8}) {
        p.config.alpha = alpha;
        const Branches b = run(p, f.g, f.x);
        M mix = a0.logits;
        for (double& v : mix.flat()) {
            v *= 1.0 - alpha;
        }
        kernels::axpy(alpha, a1.logits, mix);
        CHECK(kernels::max_abs_diff(b.logits, mix) <= 1e-12);
    }
}

TEST_CASE("model is permutation equivariant") {
    const auto f = make_fixture(25, 9);
    const auto p = with_random_biases(init_params<double>(f.mc, 4), 5);
    const std::size_t n = f.x.rows();
    std::vector<NodeId> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(7);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<Edge> edges;
    for (const Edge& e : f.ds.graph.undirected_edges()) {
        edges.push_back({perm[e.src], perm[e.dst], e.weight});
    }
    const SparseGraph gp = normalize_gcn(SparseGraph::from_edges(n, edges));
    M xp(n, f.x.cols());
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t j = 0; j < f.x.cols(); ++j) {
            xp(perm[u], j) = f.x(u, j);
        }
    }
    const M l = predict(p, f.g, f.x);
    const M lp = predict(p, gp, xp);
    double worst = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t j = 0; j < l.cols(); ++j) {
            worst = std::max(worst, std::abs(l(u, j) - lp(perm[u], j)));
        }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("query map scale does not change the output") {
    const auto f = make_fixture();
    auto p = with_random_biases(init_params<double>(f.mc, 6), 7);
    const M ref = predict(p, f.g, f.x);
    for (double c : {1e-3, 0.5, 7.0, 1e4}) {
        auto q = p;
        for (double& v : q.w_q.flat()) {
            v *= c;
        }
        for (double& v : q.b_q.flat()) {
            v *= c;
        }
        CHECK(max_relative_error(predict(q, f.g, f.x), ref) <= 1e-12);
    }
}

TEST_CASE("explicit and linear attention variants agree inside the model") {
    const auto f = make_fixture();
    const auto p = with_random_biases(init_params<double>(f.mc, 8), 9);
    ForwardOptions ex;
    ex.variant = AttentionVariant::Explicit;
    CHECK(max_relative_error(predict(p, f.g, f.x, ex), predict(p, f.g, f.x)) <= 1e-12);
}

TEST_CASE("parameter layout and init") {
    ModelConfig mc;
    mc.in_dim = 4;
    mc.hidden = 8;
    mc.out_dim = 3;
    const auto p = init_params<float>(mc, 0);
    const auto names = p.tensor_names();
    CHECK(names.front() == "w_in");
    CHECK(names.back() == "b_out");
    CHECK(names.size() == p.tensors().size());
    // 4*8+8 + 3*(64+8) + 2*(64+8) + 8*3+3
    CHECK(p.num_parameters() == 40 + 216 + 144 + 27);
    // Glorot bound sqrt(6 / (fan_in + fan_out))
    const float bound = std::sqrt(6.0f / 12.0f);
    for (float v : p.w_in.flat()) {
        CHECK(std::abs(v) <= bound);
    }
    for (float v : p.b_in.flat()) {
        CHECK(v == 0.0f);
    }
    mc.attn_bias = false;
    mc.gcn_bias = false;
    const auto q = init_params<float>(mc, 0);
    CHECK(q.num_parameters() == 40 + 192 + 128 + 27);
    CHECK(q.b_q.size() == 0);
    CHECK(init_params<float>(mc, 0).w_k == q.w_k);

    mc.alpha = 1.5;
    CHECK_THROWS_AS(init_params<float>(mc, 0), ConfigError);
}

TEST_CASE("checkpoint round trip") {
    auto f = make_fixture();
    f.mc.alpha = 0.3;
    f.mc.gcn_depth = 3;
    const auto p = with_random_biases(init_params<float>(f.mc, 11), 12);
    const auto path = temp_file("rt.ckpt");
    save_checkpoint(p, path);
    const auto q = load_checkpoint(path);
    CHECK(q.config.alpha == 0.3);
    CHECK(q.config.gcn_depth == 3);
    CHECK(q.config.in_dim == 5);
    CHECK(q.config.hidden == 6);
    CHECK(q.config.out_dim == 3);
    CHECK(q.config.attn_bias);
    const auto a = p.tensors();
    const auto b = q.tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(*a[i] == *b[i]);
    }

    const auto path2 = temp_file("rt2.ckpt");
    save_checkpoint(q, path2);
    CHECK(read_bytes(path) == read_bytes(path2));

    // Header layout: magic, version, five u32 dims, f64 alpha, u32 flags.
    const auto bytes = read_bytes(path);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SGF1");
    CHECK(bytes[4] == 1);
    CHECK(bytes[4 + 4 + 5 * 4 + 8] == 0b011);
}

TEST_CASE("checkpoint of a float64 model stores float32 values") {
    const auto f = make_fixture();
    const auto p = init_params<double>(f.mc, 2);
    const auto path = temp_file("f64.ckpt");
    save_checkpoint(p, path);
    const auto q = load_checkpoint(path);
    CHECK(q.w_in == Matrix<float>::cast_from(p.w_in));
}

TEST_CASE("corrupt checkpoints are rejected") {
    const auto f = make_fixture();
    const auto path = temp_file("bad.ckpt");
    save_checkpoint(init_params<float>(f.mc, 0), path);
    const auto good = read_bytes(path);

    auto bad = good;
    bad[0] = 'X';
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    bad = good;
    bad[4] = 2; // version
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    bad = good;
    bad.resize(good.size() - 3);
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    bad = good;
    bad.push_back(0);
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    bad = good;
    bad[4 + 4 + 5 * 4 + 8] = 0b100; // attention-dropout bit is never set
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    CHECK_THROWS_AS(load_checkpoint(temp_file("missing.ckpt")), DataError);
}

TEST_CASE("random partition covers every node once") {
    std::mt19937_64 rng(5);
    for (std::size_t n : {1u, 7u, 100u}) {
        for (std::size_t b : {1u, 3u, 7u, 100u, 1000u}) {
            const auto parts = random_partition(n, b, rng);
            CHECK(parts.size() == (n + b - 1) / b);
            std::vector<int> seen(n, 0);
            for (const auto& part : parts) {
                CHECK(part.size() <= b);
                CHECK(std::is_sorted(part.begin(), part.end()));
                for (NodeId u : part) {
                    ++seen[static_cast<std::size_t>(u)];
                }
            }
            CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
        }
    }
    std::mt19937_64 a(9);
    std::mt19937_64 b(9);
    CHECK(random_partition(50, 8, a) == random_partition(50, 8, b));
}

TEST_CASE("batched inference") {
    const auto f = make_fixture(40, 2);
    const auto p = with_random_biases(init_params<float>(f.mc, 3), 4);
    const auto full = predict_full_graph(p, f.ds);
    CHECK(predict_full_graph(p, f.ds, std::size_t{40}, 17) == full);
    CHECK(predict_full_graph(p, f.ds, std::size_t{400}, 17) == full);

    // Smaller batches equal per-batch inference on induced subgraphs.
    const auto batched = predict_full_graph(p, f.ds, std::size_t{13}, 17);
    std::mt19937_64 rng(17);
    for (const auto& part : random_partition(40, 13, rng)) {
        const SparseGraph sub = normalize_gcn(induced_subgraph(f.ds.graph, part));
        const auto l = predict(p, sub, gather_rows(f.ds.features, part));
        for (std::size_t i = 0; i < part.size(); ++i) {
            for (std::size_t j = 0; j < l.cols(); ++j) {
                CHECK(batched(static_cast<std::size_t>(part[i]), j) == l(i, j));
            }
        }
    }
}
