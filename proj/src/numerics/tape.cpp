// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "numerics/tape.hpp"

#include "error.hpp"

namespace mixbit {

Var Tape::push(Node node)
{
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value)
{
    value.check_finite("constant");
    return push(Node{"constant", std::move(value), {}, false, nullptr, {}});
}

Var Tape::input(Tensor value)
{
    value.check_finite("input");
    return push(Node{"input", std::move(value), {}, true, nullptr, {}});
}

Var Tape::param(Param& p)
{
    p.value.check_finite(p.name.c_str());
    return push(Node{"param:" + p.name, p.value, {}, true, &p, {}});
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& parents, BackwardFn backward)
{
    value.check_finite(op);
    bool needs = false;
    for (const auto& p : parents) {
        require(p.tape == this, ErrorKind::InvalidArgument, std::string(op) + ": operand from a different tape");
        needs = needs || nodes_.at(p.id).requires_grad;
    }
    return push(Node{op, std::move(value), {}, needs, nullptr, needs ? std::move(backward) : BackwardFn{}});
}

Tensor& Tape::grad(Var v)
{
    auto& n = nodes_.at(v.id);
    if (n.grad.empty())
        n.grad = Tensor::zeros_like(n.value);
    return n.grad;
}

void Tape::accumulate(Var v, std::span<const double> g)
{
    auto& n = nodes_.at(v.id);
    if (!n.requires_grad)
        return;
    auto& dst = grad(v);
    require(dst.size() == g.size(), ErrorKind::InvalidArgument, "gradient size mismatch for " + n.op);
    auto d = dst.data();
    for (std::size_t i = 0; i < g.size(); ++i)
        d[i] += g[i];
}

void Tape::backward(Var loss)
{
    require(loss.tape == this, ErrorKind::InvalidArgument, "backward: loss from a different tape");
    auto& root = nodes_.at(loss.id);
    require(root.value.size() == 1, ErrorKind::InvalidArgument, "backward: loss must be a scalar");
    if (!root.requires_grad)
        return;
    grad(loss).fill(1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (!n.requires_grad || n.grad.empty())
            continue;
        ++visits_;
        visit_order_.push_back(i);
        n.grad.check_finite(("gradient of " + n.op).c_str());
        if (n.backward) {
            n.backward(n.grad);
        } else if (n.param) {
            auto& pg = n.param->grad;
            if (!pg.same_shape(n.value))
                pg = Tensor::zeros_like(n.value);
            for (std::size_t k = 0; k < pg.size(); ++k)
                pg[k] += n.grad[k];
        }
    }
}

} // namespace mixbit
