// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "numerics/optim.hpp"

#include <cmath>
#include <numbers>

#include "error.hpp"

namespace mixbit {

void sgd_momentum_step(Param& param, double lr, double momentum, double weight_decay)
{
    require(lr > 0.0, ErrorKind::InvalidArgument, "sgd: lr must be positive");
    require(param.has_grad(), ErrorKind::State, "sgd: missing gradient for " + param.name);
    if (!param.momentum.same_shape(param.value))
        param.momentum = Tensor::zeros_like(param.value);
    auto v = param.momentum.data();
    auto w = param.value.data();
    auto g = param.grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = momentum * v[i] + g[i] + weight_decay * w[i];
        w[i] -= lr * v[i];
    }
    ++param.step;
    param.value.check_finite(param.name.c_str());
}

void adam_step(Param& param, double lr, double beta1, double beta2, double eps)
{
    require(lr > 0.0, ErrorKind::InvalidArgument, "adam: lr must be positive");
    require(param.has_grad(), ErrorKind::State, "adam: missing gradient for " + param.name);
    if (!param.adam_m.same_shape(param.value)) {
        param.adam_m = Tensor::zeros_like(param.value);
        param.adam_v = Tensor::zeros_like(param.value);
    }
    ++param.step;
    const double t = static_cast<double>(param.step);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    auto m = param.adam_m.data();
    auto v = param.adam_v.data();
    auto w = param.value.data();
    auto g = param.grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    param.value.check_finite(param.name.c_str());
}

double cosine_lr(double base_lr, std::size_t step, std::size_t total)
{
    if (total == 0)
        return base_lr;
    const double frac = static_cast<double>(step) / static_cast<double>(total);
    return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * frac));
}

} // namespace mixbit
