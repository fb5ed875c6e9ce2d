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

#include <sgf/graph.hpp>

#include <cstdint>

namespace sgf {

struct SbmOptions {
    std::size_t nodes = 1000;
    std::size_t classes = 2;
    double p_in = 0.01;
    double p_out = 0.001;
    std::size_t feat_dim = 16;
    // Class c has feature mean sep * e_c under unit-variance Gaussian noise,
    // so two class means sit sep * sqrt(2) standard deviations apart.
    double sep = 1.0;
    std::uint64_t seed = 0;
    double train_frac = 0.5;
    double valid_frac = 0.25;
};

// Stochastic block model with balanced classes and class-conditional
// Gaussian features. Deterministic under `seed`; runs in O(n + edges).
NodeDataset generate_sbm(const SbmOptions& opts);

// Uniform random graph with about n * avg_degree / 2 undirected edges and no
// self-loops, used by the scaling benchmark.
SparseGraph random_graph(std::size_t n, double avg_degree, std::uint64_t seed);

} // namespace sgf
