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

#include <sgf/kernels.hpp>
#include <sgf/matrix.hpp>

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sgf::ad {

// Handle to a node on a Tape. Only meaningful for the tape that issued it.
struct Var {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::size_t id = npos;

    bool valid() const noexcept { return id != npos; }
};

// Reverse-mode tape. Nodes are appended in execution order, so the vector
// itself is a topological order and backward is a plain reverse sweep.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Var leaf(Matrix<T> value) { return push(std::move(value), true, {}, {}); }

    Var constant(Matrix<T> value) { return push(std::move(value), false, {}, {}); }

    // Appends an op result. The node requires a gradient iff any input does;
    // `fn` runs during backward only in that case.
    Var record(Matrix<T> value, std::initializer_list<Var> inputs, BackwardFn fn) {
        bool needs = false;
        std::vector<std::size_t> ids;
        ids.reserve(inputs.size());
        for (Var v : inputs) {
            check(v);
            needs = needs || nodes_[v.id].requires_grad;
            ids.push_back(v.id);
        }
        return push(std::move(value), needs, std::move(ids), needs ? std::move(fn) : BackwardFn{});
    }

    const Matrix<T>& value(Var v) const {
        check(v);
        return nodes_[v.id].value;
    }

    bool requires_grad(Var v) const {
        check(v);
        return nodes_[v.id].requires_grad;
    }

    const std::vector<std::size_t>& inputs(Var v) const {
        check(v);
        return nodes_[v.id].inputs;
    }

    // Gradient flowing into node `self` (valid inside a BackwardFn).
    const Matrix<T>& grad_of(std::size_t self) const { return nodes_[self].grad; }

    // Adds `g` into the gradient of `v`. No-op for nodes that do not require
    // a gradient.
    void accumulate(Var v, Matrix<T>&& g) {
        Node& node = nodes_[v.id];
        if (!node.requires_grad) {
            return;
        }
        if (!node.value.same_shape(g)) {
            throw ShapeError("gradient shape " + shape_str(g) + " does not match value " +
                             shape_str(node.value));
        }
        if (!node.has_grad) {
            node.grad = std::move(g);
            node.has_grad = true;
        } else {
            kernels::axpy(T(1), g, node.grad);
        }
    }

    std::size_t size() const noexcept { return nodes_.size(); }

    // Reverse sweep from the 1x1 node `out`. Returns d out / d leaf for each
    // requested leaf (zeros for leaves the output does not depend on), then
    // resets the tape.
    std::vector<Matrix<T>> backward(Var out, std::span<const Var> leaves) {
        check(out);
        if (nodes_[out.id].value.rows() != 1 || nodes_[out.id].value.cols() != 1) {
            throw ShapeError("backward: output must be 1x1, got " +
                             shape_str(nodes_[out.id].value));
        }
        std::vector<char> keep(nodes_.size(), 0);
        for (Var l : leaves) {
            check(l);
            keep[l.id] = 1;
        }
        if (nodes_[out.id].requires_grad) {
            nodes_[out.id].grad = Matrix<T>(1, 1, T(1));
            nodes_[out.id].has_grad = true;
        }
        for (std::size_t i = out.id + 1; i-- > 0;) {
            Node& node = nodes_[i];
            if (node.has_grad && node.fn) {
                node.fn(*this, i);
            }
            node.fn = nullptr;
            if (!keep[i]) {
                // Every consumer of node i has a larger index and is done.
                node.grad = Matrix<T>();
                node.value = Matrix<T>();
                node.has_grad = false;
            }
        }
        std::vector<Matrix<T>> grads;
        grads.reserve(leaves.size());
        for (Var l : leaves) {
            Node& node = nodes_[l.id];
            if (node.has_grad) {
                grads.push_back(std::move(node.grad));
            } else {
                grads.emplace_back(node.value.rows(), node.value.cols());
            }
        }
        reset();
        return grads;
    }

    void reset() { nodes_.clear(); }

private:
    struct Node {
        Matrix<T> value;
        Matrix<T> grad;
        bool has_grad = false;
        bool requires_grad = false;
        std::vector<std::size_t> inputs;
        BackwardFn fn;
    };

    Var push(Matrix<T> value, bool requires_grad, std::vector<std::size_t> inputs,
             BackwardFn fn) {
        Node node;
        node.value = std::move(value);
        node.requires_grad = requires_grad;
        node.inputs = std::move(inputs);
        node.fn = std::move(fn);
        nodes_.push_back(std::move(node));
        return Var{nodes_.size() - 1};
    }

    void check(Var v) const {
        if (!v.valid() || v.id >= nodes_.size()) {
            throw ShapeError("tape: invalid variable handle");
        }
    }

    std::vector<Node> nodes_;
};

} // namespace sgf::ad
