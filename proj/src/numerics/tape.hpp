// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "numerics/tensor.hpp"

namespace mixbit {

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool valid() const noexcept { return tape != nullptr; }
};

// Reverse-mode record of executed operations. Values are stored in execution
// order; backward() replays the records in reverse, visiting each at most once.
class Tape {
public:
    // Receives the gradient of the op output and accumulates into its inputs.
    using BackwardFn = std::function<void(const Tensor& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    // Leaf whose gradient is readable through grad() after backward().
    Var input(Tensor value);
    // Leaf bound to a Param; backward() adds into param.grad.
    Var param(Param& p);

    Var record(const char* op, Tensor value, const std::vector<Var>& parents, BackwardFn backward);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    // Gradient buffer of v, allocated on first use.
    Tensor& grad(Var v);
    void accumulate(Var v, std::span<const double> g);

    void backward(Var loss);

    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t backward_visits() const noexcept { return visits_; }
    const std::vector<std::size_t>& visit_order() const noexcept { return visit_order_; }

private:
    struct Node {
        std::string op;
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        Param* param = nullptr;
        BackwardFn backward;
    };

    Var push(Node node);

    std::deque<Node> nodes_;
    std::size_t visits_ = 0;
    std::vector<std::size_t> visit_order_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

} // namespace mixbit
