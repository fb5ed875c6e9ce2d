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

#include <sgf/gradcheck.hpp>
#include <sgf/tape.hpp>

#include <functional>
#include <vector>

namespace sgf::testing {

// Builds a scalar on the tape from the given leaves.
using ScalarFn = std::function<ad::Var(ad::Tape<double>&, const std::vector<ad::Var>&)>;

inline double eval_scalar(const ScalarFn& f, const std::vector<Matrix<double>>& xs) {
    ad::Tape<double> t;
    std::vector<ad::Var> vs;
    for (const auto& x : xs) {
        vs.push_back(t.constant(x));
    }
    return t.value(f(t, vs))(0, 0);
}

// Largest relative error over all inputs between tape gradients and
// central differences.
inline double tape_vs_fd(const ScalarFn& f, const std::vector<Matrix<double>>& xs,
                         double h = 1e-5) {
    ad::Tape<double> t;
    std::vector<ad::Var> vs;
    for (const auto& x : xs) {
        vs.push_back(t.leaf(x));
    }
    const auto grads = t.backward(f(t, vs), vs);
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        auto probe = xs;
        const auto fd = finite_difference(
            [&](const Matrix<double>& x) {
                probe[i] = x;
                return eval_scalar(f, probe);
            },
            xs[i], h);
        worst = std::max(worst, max_relative_error(grads[i], fd));
    }
    return worst;
}

} // namespace sgf::testing
