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

#include <sgf/error.hpp>
#include <sgf/gcn.hpp>

#include <string>

namespace sgf {

template <typename T>
void GcnStack<T>::validate() const {
    if (weights.empty() || weights.size() > 3) {
        throw ConfigError("gcn: depth must be 1, 2 or 3, got " + std::to_string(weights.size()));
    }
    const std::size_t d = weights.front().rows();
    for (const auto& w : weights) {
        if (w.rows() != d || w.cols() != d) {
            throw ShapeError("gcn: layer weights must all be " + std::to_string(d) + "x" +
                             std::to_string(d) + ", got " + shape_str(w));
        }
    }
    if (has_bias()) {
        if (biases.size() != weights.size()) {
            throw ShapeError("gcn: one bias per layer expected");
        }
        for (const auto& b : biases) {
            if (b.rows() != 1 || b.cols() != d) {
                throw ShapeError("gcn: bias must be 1x" + std::to_string(d));
            }
        }
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
        throw ConfigError("gcn: dropout must be in [0, 1)");
    }
}

namespace ad {

template <typename T>
Var gcn_forward(Tape<T>& t, const SparseGraph& g_norm, Var z0, const std::vector<Var>& w,
                const std::vector<Var>& b, double dropout_p, bool use_relu_between,
                bool training, std::mt19937_64* rng) {
    if (t.value(z0).rows() != g_norm.num_nodes()) {
        throw ShapeError("gcn: " + std::to_string(t.value(z0).rows()) + " rows vs " +
                         std::to_string(g_norm.num_nodes()) + " graph nodes");
    }
    Var z = z0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        z = spmm(t, g_norm, matmul(t, z, w[l]));
        if (!b.empty()) {
            z = add_row(t, z, b[l]);
        }
        if (l + 1 < w.size()) {
            if (use_relu_between) {
                z = relu(t, z);
            }
            if (training && dropout_p > 0.0) {
                z = dropout(t, z, dropout_p, *rng);
            }
        }
    }
    return z;
}

} // namespace ad

template <typename T>
Matrix<T> gcn_forward(const GcnStack<T>& stack, const Matrix<T>& z0, const SparseGraph& g_norm,
                      bool training, std::mt19937_64* rng) {
    stack.validate();
    if (training && stack.dropout_p > 0.0 && rng == nullptr) {
        throw ConfigError("gcn: training with dropout needs an rng");
    }
    ad::Tape<T> t;
    std::vector<ad::Var> w;
    std::vector<ad::Var> b;
    for (const auto& m : stack.weights) {
        w.push_back(t.constant(m));
    }
    for (const auto& m : stack.biases) {
        b.push_back(t.constant(m));
    }
    const ad::Var out = ad::gcn_forward(t, g_norm, t.constant(z0), w, b, stack.dropout_p,
                                        stack.use_relu_between, training, rng);
    return t.value(out);
}

template struct GcnStack<float>;
template struct GcnStack<double>;
template ad::Var ad::gcn_forward(ad::Tape<float>&, const SparseGraph&, ad::Var,
                                 const std::vector<ad::Var>&, const std::vector<ad::Var>&,
                                 double, bool, bool, std::mt19937_64*);
template ad::Var ad::gcn_forward(ad::Tape<double>&, const SparseGraph&, ad::Var,
                                 const std::vector<ad::Var>&, const std::vector<ad::Var>&,
                                 double, bool, bool, std::mt19937_64*);
template Matrix<float> gcn_forward(const GcnStack<float>&, const Matrix<float>&,
                                   const SparseGraph&, bool, std::mt19937_64*);
template Matrix<double> gcn_forward(const GcnStack<double>&, const Matrix<double>&,
                                    const SparseGraph&, bool, std::mt19937_64*);

} // namespace sgf
