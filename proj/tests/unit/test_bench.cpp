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

#include <sgf/bench.hpp>
#include <sgf/error.hpp>
#include <sgf/verify.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sgf;

TEST_CASE("bench sizes") {
    CHECK(bench_sizes(10000, 100000, 10) ==
          std::vector<std::size_t>{10000, 20000, 30000, 40000, 50000, 60000, 70000, 80000,
                                   90000, 100000});
    CHECK(bench_sizes(100, 100, 1) == std::vector<std::size_t>{100});
    CHECK_THROWS_AS(bench_sizes(100, 50, 3), ConfigError);
    CHECK_THROWS_AS(bench_sizes(100, 200, 0), ConfigError);
}

TEST_CASE("bench csv round trip") {
    std::vector<BenchPoint> pts{
        {100, 480, "linear", 1.25, 3.5, 123456, 3, false},
        {100, 480, "explicit", 2.0, 6.125, 999999, 3, false},
        {200, 990, "explicit", 0.0, 0.0, 0, 3, true},
    };
    const auto path = std::filesystem::temp_directory_path() / "sgf_bench_rt.csv";
    emit_csv(pts, path);
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(text.rfind("n,e,variant,fwd_ms,fwd_bwd_ms,peak_bytes,repeats\n", 0) == 0);
    CHECK(text.find("200,990,explicit,OOM,OOM,OOM,3\n") != std::string::npos);
    const auto back = parse_bench_csv(text);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].n == pts[i].n);
        CHECK(back[i].e == pts[i].e);
        CHECK(back[i].variant == pts[i].variant);
        CHECK(back[i].fwd_ms == pts[i].fwd_ms);
        CHECK(back[i].fwd_bwd_ms == pts[i].fwd_bwd_ms);
        CHECK(back[i].peak_bytes == pts[i].peak_bytes);
        CHECK(back[i].oom == pts[i].oom);
    }
    CHECK_THROWS_AS(parse_bench_csv("n,e\n"), FormatError);
    CHECK_THROWS_AS(emit_csv({}, path), ConfigError);
}

TEST_CASE("linear fit") {
    const auto f = linear_fit({1, 2, 3, 4}, {3, 5, 7, 9});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.r2 == doctest::Approx(1.0));
    CHECK(linear_fit({1, 2, 3, 4}, {1, 0, 1, 0}).r2 == doctest::Approx(0.2));
    CHECK_THROWS_AS(linear_fit({1}, {1}), ConfigError);
}

TEST_CASE("scaling run without clocks is reproducible") {
    ScalingOptions o;
    o.n_values = {64, 128};
    o.hidden = 16;
    o.feat_dim = 8;
    o.timing = false;
    const auto a = run_scaling(o);
    const auto b = run_scaling(o);
    CHECK(bench_csv(a) == bench_csv(b));
    REQUIRE(a.size() == 4);
    CHECK(a[0].variant == "linear");
    CHECK(a[1].variant == "explicit");
    CHECK(a[0].fwd_ms == 0.0);
    CHECK(a[0].peak_bytes > 0);
    // explicit attention holds N x N buffers, linear does not
    CHECK(a[3].peak_bytes > a[2].peak_bytes);

    o.explicit_cap = 64;
    CHECK(run_scaling(o).size() == 3);
    o.repeats = 2;
    CHECK_THROWS_AS(run_scaling(o), ConfigError);
}

TEST_CASE("memory budget turns into an OOM record") {
    ScalingOptions o;
    o.n_values = {256};
    o.hidden = 16;
    o.feat_dim = 8;
    o.timing = false;
    o.memory_budget = 1 << 20;
    const auto pts = run_scaling(o);
    REQUIRE(pts.size() == 2);
    CHECK(pts[1].oom);
    CHECK_FALSE(pts[0].oom);
}

TEST_CASE("verify report") {
    VerifyOptions o;
    o.trials = 2;
    o.seed = 5;
    const auto r = run_verify(o);
    CHECK(r.ok());
    CHECK(r.groups.size() >= 5);
    CHECK(r.text() == run_verify(o).text());
    CHECK(r.text().find("[INFO]") != std::string::npos);

    o.scale = AttentionScale::InverseSqrtN;
    const auto bad = run_verify(o);
    CHECK_FALSE(bad.ok());
    CHECK_FALSE(bad.groups[0].pass);
    CHECK(bad.groups[0].name == "attention_equivalence");
    o.trials = 0;
    CHECK_THROWS_AS(run_verify(o), ConfigError);
}

TEST_CASE("model gradient check") {
    ModelGradOptions o;
    o.nodes = 10;
    for (const auto& e : model_gradient_check(o)) {
        CHECK_MESSAGE(e.rel_error <= 1e-4, e.name);
    }
}
