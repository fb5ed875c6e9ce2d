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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sgf {

struct BenchPoint {
    std::size_t n = 0;
    std::size_t e = 0; // undirected edges
    std::string variant; // "linear" | "explicit"
    double fwd_ms = 0.0;
    double fwd_bwd_ms = 0.0;
    std::size_t peak_bytes = 0; // tracked Matrix storage, forward + backward
    std::size_t repeats = 0;
    bool oom = false; // the allocation budget was exceeded; numbers are absent
};

struct ScalingOptions {
    std::vector<std::size_t> n_values; // strictly increasing
    double avg_degree = 10.0;
    std::size_t hidden = 256;
    std::size_t feat_dim = 64;
    std::size_t classes = 8;
    std::uint64_t seed = 0;
    // The explicit variant only runs for n <= explicit_cap; 0 disables it.
    std::size_t explicit_cap = 20000;
    std::size_t repeats = 3;
    // false: skip the clocks and write 0 ms, so output is byte-reproducible.
    bool timing = true;
    // Tracked-allocation budget per point; exceeding it records OOM.
    std::size_t memory_budget = std::size_t{3} << 30;

    void validate() const;
};

/// Times forward and forward+backward of the full model (float32, dropout
/// off) on a random graph per n. Medians over `repeats` after one warm-up.
std::vector<BenchPoint> run_scaling(const ScalingOptions& opts);

/// Evenly spaced sizes min, ..., max (steps >= 2 values, or just min).
std::vector<std::size_t> bench_sizes(std::size_t min_n, std::size_t max_n, std::size_t steps);

inline constexpr const char* kBenchHeader = "n,e,variant,fwd_ms,fwd_bwd_ms,peak_bytes,repeats";

/// CSV text; OOM points carry "OOM" in the three measurement columns.
std::string bench_csv(const std::vector<BenchPoint>& points);
void emit_csv(const std::vector<BenchPoint>& points, const std::filesystem::path& path);
std::vector<BenchPoint> parse_bench_csv(const std::string& text);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

} // namespace sgf
