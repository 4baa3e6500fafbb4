// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "numerics/tensor.hpp"

namespace mixbit {

// v <- momentum*v + grad + weight_decay*value; value <- value - lr*v
void sgd_momentum_step(Param& param, double lr, double momentum, double weight_decay);

// Bias-corrected Adam. Increments param.step.
void adam_step(Param& param, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Cosine annealing from base_lr at step 0 to 0 at step `total`.
double cosine_lr(double base_lr, std::size_t step, std::size_t total);

} // namespace mixbit
