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

#include <sgf/error.hpp>
#include <sgf/gradcheck.hpp>
#include <sgf/graph.hpp>
#include <sgf/kernels.hpp>
#include <sgf/sbm.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace sgf;

namespace {

// Dense oracle: O(N^2 d) loop over the dense adjacency.
Matrix<double> dense_mul(const Matrix<double>& a, const Matrix<double>& x) {
    Matrix<double> out(a.rows(), x.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            for (std::size_t j = 0; j < x.cols(); ++j) {
                out(i, j) += a(i, k) * x(k, j);
            }
        }
    }
    return out;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("sgf_unit_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream(p) << s;
}

} // namespace

TEST_CASE("from_edges symmetrizes and deduplicates") {
    const Edge e[] = {{0, 1}, {1, 0}, {1, 2, 1.0}};
    const auto g = SparseGraph::from_edges(3, e);
    CHECK(g.num_entries() == 4);
    CHECK(g.num_undirected_edges() == 2);
    CHECK(g.row_ptr() == std::vector<std::int64_t>{0, 1, 3, 4});
    CHECK(g.col_idx() == std::vector<NodeId>{1, 0, 2, 1});
}

TEST_CASE("from_edges rejects bad input") {
    const Edge out_of_range[] = {{0, 3}};
    CHECK_THROWS_AS(SparseGraph::from_edges(3, out_of_range), DataError);
    const Edge contradictory[] = {{0, 1, 1.0}, {1, 0, 2.0}};
    CHECK_THROWS_AS(SparseGraph::from_edges(3, contradictory), DataError);
}

TEST_CASE("single node without edges") {
    const auto g = SparseGraph::from_edges(1, {});
    CHECK(g.row_ptr() == std::vector<std::int64_t>{0, 0});
    const auto n = normalize_gcn(g);
    CHECK(n.weight(0, 0) == 1.0);
}

TEST_CASE("normalize_gcn on a 2-node path") {
    const Edge e[] = {{0, 1}};
    const auto n = normalize_gcn(SparseGraph::from_edges(2, e));
    CHECK(n.weight(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(n.weight(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(n.weight(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(n.weight(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("normalize_gcn is symmetric with positive rows") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto g = random_graph(10 + 4 * seed, 3.0, seed);
        const auto n = normalize_gcn(g);
        // sqrt(d + 1) is the eigenvector of eigenvalue 1, which also bounds
        // the spectrum; row sums themselves can exceed 1.
        Matrix<double> s(g.num_nodes(), 1);
        for (std::size_t u = 0; u < g.num_nodes(); ++u) {
            s(u, 0) = std::sqrt(static_cast<double>(g.neighbors(u).size()) + 1.0);
        }
        const auto ns = spmm(n, s);
        for (std::size_t u = 0; u < n.num_nodes(); ++u) {
            double row = 0.0;
            auto nb = n.neighbors(u);
            auto w = n.weights(u);
            for (std::size_t i = 0; i < nb.size(); ++i) {
                CHECK(w[i] == n.weight(nb[i], u));
                row += w[i];
            }
            CHECK(row > 0.0);
            CHECK(ns(u, 0) == doctest::Approx(s(u, 0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("normalize_gcn row sums exceed 1 at a star center") {
    const Edge e[] = {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
    const auto n = normalize_gcn(SparseGraph::from_edges(5, e));
    double row = 0.0;
    for (double w : n.weights(0)) {
        row += w;
    }
    CHECK(row == doctest::Approx(0.2 + 4.0 / std::sqrt(10.0)).epsilon(1e-14));
    CHECK(row > 1.0);
}

TEST_CASE("spmm matches the dense oracle") {
    std::mt19937_64 rng(3);
    for (std::size_t n : {2u, 3u, 50u, 200u}) {
        const auto g = normalize_gcn(random_graph(n, 4.0, n));
        const auto x = random_normal<double>(n, 5, rng);
        CHECK(kernels::max_abs_diff(spmm(g, x), dense_mul(g.to_dense(), x)) <= 1e-12);
    }
}

TEST_CASE("spmm trivial cases") {
    const Edge loops[] = {{0, 0}, {1, 1}, {2, 2}};
    const auto id = SparseGraph::from_edges(3, loops);
    const Matrix<double> x{{1, 2}, {3, 4}, {5, 6}};
    CHECK(spmm(id, x) == x);

    const Edge path[] = {{0, 1}};
    const auto p = SparseGraph::from_edges(2, path);
    const Matrix<double> y{{1}, {0}};
    CHECK(spmm(p, y) == Matrix<double>{{0}, {1}});

    CHECK_THROWS_AS(spmm(p, x), ShapeError);
}

TEST_CASE("induced subgraph keeps only inner edges") {
    const Edge e[] = {{0, 1}, {1, 2}, {2, 3}, {0, 3}};
    const auto g = SparseGraph::from_edges(4, e);
    const NodeId keep[] = {0, 1, 3};
    const auto s = induced_subgraph(g, keep);
    CHECK(s.num_nodes() == 3);
    CHECK(s.num_undirected_edges() == 2);
    CHECK(s.weight(0, 1) == 1.0);
    CHECK(s.weight(0, 2) == 1.0);
    CHECK(s.weight(1, 2) == 0.0);
}

TEST_CASE("dataset load/save round trip") {
    const auto dir = temp_dir("roundtrip");
    write_file(dir / "meta.json",
               R"({"num_nodes": 4, "num_features": 2, "num_classes": 2, "task": "multiclass"})");
    write_file(dir / "edges.csv", "src,dst\n0,1\n1,0\n2,3\n");
    write_file(dir / "features.csv", "1,0\n0,1\n0.5,0.5\n-1,2\n");
    write_file(dir / "labels.csv", "node,label\n0,0\n1,1\n2,0\n3,1\n");
    write_file(dir / "split.json", R"({"train":[0,1],"valid":[2],"test":[3]})");
    const auto ds = load_dataset(dir);
    CHECK(ds.graph.num_undirected_edges() == 2);
    CHECK(ds.features(3, 1) == 2.0f);

    const auto out = temp_dir("roundtrip_out");
    save_dataset(ds, out);
    const auto back = load_dataset(out);
    CHECK(back.graph == ds.graph);
    CHECK(back.features == ds.features);
    CHECK(back.labels.classes == ds.labels.classes);
    CHECK(back.split.test == ds.split.test);
}

TEST_CASE("dataset errors") {
    const auto dir = temp_dir("errors");
    CHECK_THROWS_AS(load_dataset(dir), DataError);
    write_file(dir / "meta.json",
               R"({"num_nodes": 2, "num_features": 1, "num_classes": 2, "task": "multiclass"})");
    write_file(dir / "edges.csv", "0,1\n");
    write_file(dir / "features.csv", "1\n2\n");
    write_file(dir / "labels.csv", "0,0\n1,1\n");
    write_file(dir / "split.json", R"({"train":[0],"valid":[0],"test":[1]})");
    CHECK_THROWS_AS(load_dataset(dir), DataError);
    write_file(dir / "split.json", R"({"train":[0],"valid":[],"test":[1]})");
    CHECK_NOTHROW(load_dataset(dir));
    write_file(dir / "edges.csv", "0,5\n");
    CHECK_THROWS_AS(load_dataset(dir), DataError);
}

TEST_CASE("generate_sbm is deterministic and validates") {
    SbmOptions o;
    o.nodes = 200;
    o.seed = 7;
    const auto a = generate_sbm(o);
    const auto b = generate_sbm(o);
    CHECK(a.graph == b.graph);
    CHECK(a.features == b.features);
    CHECK(a.split.train == b.split.train);
    CHECK(a.split.train.size() == 100);
    CHECK(a.split.valid.size() == 50);
    CHECK(a.split.test.size() == 50);

    o.p_in = 0.0;
    o.p_out = 0.0;
    CHECK(generate_sbm(o).graph.num_entries() == 0);

    o.p_out = 0.5;
    CHECK_THROWS_AS(generate_sbm(o), ConfigError);
}
