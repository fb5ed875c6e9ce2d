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

#include <sgf/matrix.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace sgf {

// max_ij |a - ref| / max_ij |ref|. Scale-aware, and well defined when
// individual reference entries are near zero.
template <typename T>
double max_relative_error(const Matrix<T>& a, const Matrix<T>& ref) {
    if (!a.same_shape(ref)) {
        throw ShapeError("max_relative_error: shape mismatch " + shape_str(a) + " vs " +
                         shape_str(ref));
    }
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = static_cast<double>(ref.data()[i]);
        diff = std::max(diff, std::abs(static_cast<double>(a.data()[i]) - r));
        scale = std::max(scale, std::abs(r));
    }
    if (scale == 0.0) {
        return diff;
    }
    return diff / scale;
}

// Central differences of the scalar function f at x, one entry at a time.
template <typename F>
Matrix<double> finite_difference(F&& f, const Matrix<double>& x, double h = 1e-5) {
    Matrix<double> g(x.rows(), x.cols());
    Matrix<double> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe.data()[i];
        probe.data()[i] = orig + h;
        const double fp = f(probe);
        probe.data()[i] = orig - h;
        const double fm = f(probe);
        probe.data()[i] = orig;
        g.data()[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

template <typename T>
Matrix<T> random_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                        double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix<T> m(rows, cols);
    for (T& v : m.flat()) {
        v = static_cast<T>(dist(rng));
    }
    return m;
}

template <typename T>
Matrix<T> random_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                         double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix<T> m(rows, cols);
    for (T& v : m.flat()) {
        v = static_cast<T>(dist(rng));
    }
    return m;
}

} // namespace sgf
