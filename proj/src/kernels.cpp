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

#include <sgf/kernels.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

namespace sgf {
namespace {

std::atomic<int> g_threads{1};

// Output rows per GEMM block, and shared-dimension rows per partial sum in the
// transposed-reduction case. Both fixed so blocking never depends on threads.
constexpr std::size_t kRowBlock = 256;
constexpr std::size_t kReduceChunk = 4096;

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using ConstMap = Eigen::Map<const RowMajor<T>>;

template <typename T>
using MutMap = Eigen::Map<RowMajor<T>>;

} // namespace

void set_num_threads(int n) { g_threads.store(std::max(1, n)); }

int num_threads() noexcept { return g_threads.load(); }

void parallel_blocks(std::size_t n, std::size_t block,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) {
        return;
    }
    const std::size_t nblocks = (n + block - 1) / block;
    const auto workers = static_cast<std::size_t>(num_threads());
    if (workers <= 1 || nblocks == 1) {
        for (std::size_t b = 0; b < nblocks; ++b) {
            fn(b * block, std::min(n, (b + 1) * block));
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t b = next++; b < nblocks; b = next++) {
            fn(b * block, std::min(n, (b + 1) * block));
        }
    };
    std::vector<std::jthread> pool;
    const std::size_t spawn = std::min(workers, nblocks) - 1;
    pool.reserve(spawn);
    for (std::size_t t = 0; t < spawn; ++t) {
        pool.emplace_back(worker);
    }
    worker();
}

namespace kernels {

template <typename T>
Matrix<T> gemm(const Matrix<T>& a, Trans ta, const Matrix<T>& b, Trans tb) {
    if (ta == Trans::Yes && tb == Trans::Yes) {
        throw ShapeError("gemm: transposing both operands is not supported");
    }
    const std::size_t m = ta == Trans::No ? a.rows() : a.cols();
    const std::size_t k = ta == Trans::No ? a.cols() : a.rows();
    const std::size_t kb = tb == Trans::No ? b.rows() : b.cols();
    const std::size_t n = tb == Trans::No ? b.cols() : b.rows();
    if (k != kb) {
        throw ShapeError("gemm: inner dimensions differ (" + shape_str(a) + " vs " +
                         shape_str(b) + ")");
    }
    Matrix<T> c(m, n);
    if (m == 0 || n == 0 || k == 0) {
        return c;
    }
    ConstMap<T> A(a.data(), static_cast<Eigen::Index>(a.rows()),
                  static_cast<Eigen::Index>(a.cols()));
    ConstMap<T> B(b.data(), static_cast<Eigen::Index>(b.rows()),
                  static_cast<Eigen::Index>(b.cols()));

    if (ta == Trans::No) {
        parallel_blocks(m, kRowBlock, [&](std::size_t r0, std::size_t r1) {
            const auto rows = static_cast<Eigen::Index>(r1 - r0);
            MutMap<T> C(c.data() + r0 * n, rows, static_cast<Eigen::Index>(n));
            auto Ablk = A.middleRows(static_cast<Eigen::Index>(r0), rows);
            if (tb == Trans::No) {
                C.noalias() = Ablk * B;
            } else {
                C.noalias() = Ablk * B.transpose();
            }
        });
        return c;
    }

    // a^T b: reduce over the shared row dimension in fixed chunks, then sum
    // partials in chunk order.
    const std::size_t nchunks = (k + kReduceChunk - 1) / kReduceChunk;
    std::vector<RowMajor<T>> partial(nchunks);
    parallel_blocks(k, kReduceChunk, [&](std::size_t r0, std::size_t r1) {
        const auto rows = static_cast<Eigen::Index>(r1 - r0);
        const auto off = static_cast<Eigen::Index>(r0);
        RowMajor<T>& p = partial[r0 / kReduceChunk];
        p.noalias() = A.middleRows(off, rows).transpose() * B.middleRows(off, rows);
    });
    MutMap<T> C(c.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    C = partial[0];
    for (std::size_t i = 1; i < nchunks; ++i) {
        C += partial[i];
    }
    return c;
}

template <typename T>
void axpy(T alpha, const Matrix<T>& x, Matrix<T>& out) {
    if (!x.same_shape(out)) {
        throw ShapeError("axpy: shape mismatch " + shape_str(x) + " vs " + shape_str(out));
    }
    const T* src = x.data();
    T* dst = out.data();
    for (std::size_t i = 0, n = x.size(); i < n; ++i) {
        dst[i] += alpha * src[i];
    }
}

template <typename T>
Matrix<T> col_sums(const Matrix<T>& x) {
    Matrix<T> s(1, x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        for (std::size_t c = 0; c < x.cols(); ++c) {
            s(0, c) += row[c];
        }
    }
    return s;
}

template <typename T>
Matrix<T> row_sums(const Matrix<T>& x) {
    Matrix<T> s(x.rows(), 1);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        T acc = 0;
        for (T v : x.row(r)) {
            acc += v;
        }
        s(r, 0) = acc;
    }
    return s;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& x) {
    Matrix<T> t(x.cols(), x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            t(c, r) = x(r, c);
        }
    }
    return t;
}

template <typename T>
double sum_squares(const Matrix<T>& x) {
    double acc = 0.0;
    for (T v : x.flat()) {
        acc += static_cast<double>(v) * static_cast<double>(v);
    }
    return acc;
}

template <typename T>
double max_abs_diff(const Matrix<T>& a, const Matrix<T>& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("max_abs_diff: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a.data()[i]) -
                                 static_cast<double>(b.data()[i])));
    }
    return m;
}

#define SGF_INSTANTIATE(T)                                                      \
    template Matrix<T> gemm(const Matrix<T>&, Trans, const Matrix<T>&, Trans);  \
    template void axpy(T, const Matrix<T>&, Matrix<T>&);                        \
    template Matrix<T> col_sums(const Matrix<T>&);                              \
    template Matrix<T> row_sums(const Matrix<T>&);                              \
    template Matrix<T> transpose(const Matrix<T>&);                             \
    template double sum_squares(const Matrix<T>&);                              \
    template double max_abs_diff(const Matrix<T>&, const Matrix<T>&);

SGF_INSTANTIATE(float)
SGF_INSTANTIATE(double)
#undef SGF_INSTANTIATE

} // namespace kernels
} // namespace sgf
