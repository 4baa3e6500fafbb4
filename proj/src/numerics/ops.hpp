// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "numerics/im2col.hpp"
#include "numerics/tape.hpp"

namespace mixbit {

// Plain forward kernels, shared by the differentiable ops and the inference paths.
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, std::size_t stride, std::size_t pad);
Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor global_avg_pool_forward(const Tensor& input);

// Differentiable ops. Every op records itself on the tape of its first operand.

// NCHW input, OIHW weight; cross-correlation with zero padding.
Var conv2d(Var input, Var weight, std::size_t stride, std::size_t pad);
// out = input * weight^T + bias.
Var dense(Var input, Var weight, Var bias);
Var relu(Var input);
Var add(Var a, Var b);

struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
};

Var batchnorm(Var input, Var gamma, Var beta, BatchNormState& state, bool training, double momentum = 0.1,
              double eps = 1e-5);
Var global_avg_pool(Var input);

// Mean over rows of -log softmax(logits)[label].
Var softmax_xent(Var logits, std::span<const std::int32_t> labels);

// Scalar helpers used by tests and gradient checks.
Var sum_squares(Var x);
Var dot_const(Var x, const Tensor& weights);
Var scale(Var x, double factor);

} // namespace mixbit
