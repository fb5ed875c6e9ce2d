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

#include <cstddef>
#include <functional>

namespace sgf {

// Kernel parallelism. Work is always cut into blocks whose boundaries depend
// only on the problem size, so results are bit-identical for any thread count.
void set_num_threads(int n);
int num_threads() noexcept;

// Calls fn(begin, end) for every block [k*block, min((k+1)*block, n)).
void parallel_blocks(std::size_t n, std::size_t block,
                     const std::function<void(std::size_t, std::size_t)>& fn);

namespace kernels {

enum class Trans { No, Yes };

// C = op(a) * op(b). Supported combinations: (No, No), (No, Yes), (Yes, No).
template <typename T>
Matrix<T> gemm(const Matrix<T>& a, Trans ta, const Matrix<T>& b, Trans tb);

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    return gemm(a, Trans::No, b, Trans::No);
}

// out += alpha * x (same shape)
template <typename T>
void axpy(T alpha, const Matrix<T>& x, Matrix<T>& out);

// Column sums as a 1 x cols matrix, accumulated in ascending row order.
template <typename T>
Matrix<T> col_sums(const Matrix<T>& x);

// Row sums as a rows x 1 matrix.
template <typename T>
Matrix<T> row_sums(const Matrix<T>& x);

template <typename T>
Matrix<T> transpose(const Matrix<T>& x);

template <typename T>
double sum_squares(const Matrix<T>& x);

// max_{ij} |a_ij - b_ij|
template <typename T>
double max_abs_diff(const Matrix<T>& a, const Matrix<T>& b);

} // namespace kernels
} // namespace sgf
