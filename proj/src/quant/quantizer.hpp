// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "numerics/tape.hpp"

namespace mixbit {

// Plan entry that disables quantization of a layer entirely.
inline constexpr int kBypassBits = 32;

inline constexpr double kAlphaInit = 6.0;
inline constexpr double kAlphaFloor = 1e-3;

// 2^b - 1
inline double grid_levels(int bits) { return static_cast<double>((std::uint64_t{1} << bits) - 1); }

// floor(x + 0.5): round half up on the non-negative domain.
double round_half_up(double x);

// round_half_up((2^b-1)*x) / (2^b-1) for x in [0,1].
double quantize_grid(double x, int bits);

// Integer code of quantize_grid(x, bits), in [0, 2^b-1].
std::uint32_t grid_code(double x, int bits);

// tanh(W) / (2*max|tanh(W)|) + 1/2, the [0,1] input of the weight quantizer.
// Returns an empty tensor when every tanh(W) is zero.
Tensor normalize_weights(const Tensor& w);

// 2*quantize_grid(normalize_weights(W), b) - 1; all-zero W maps to zeros.
Tensor quantize_weights(const Tensor& w, int bits);

// alpha * quantize_grid(clip(X, 0, alpha)/alpha, b)
Tensor quantize_activations(const Tensor& x, double alpha, int bits);

// Straight-through gradient of the activation quantizer: upstream where x <= alpha, 0 elsewhere.
Tensor ste_backward(const Tensor& upstream, const Tensor& x, double alpha);

// d<upstream, X_hat>/d alpha for X_hat = alpha * sum_i coeffs_i * quantize_grid(clip(X,0,alpha)/alpha, bits_i).
// Saturated elements (x > alpha) contribute 1 per unit upstream; the rest
// contribute sum_i coeffs_i * (X^i - x/alpha).
double alpha_gradient(const Tensor& x, double alpha, std::span<const double> coeffs, std::span<const int> bits,
                      const Tensor& upstream);

// Clamps alpha to the lower bound after an optimizer step.
void project_alpha(Param& alpha);

// Differentiable aggregated weight quantizer: sum_i coeffs_i * quantize_weights(W, bits_i).
// Rounding is straight-through; the tanh/max normalization is differentiated exactly.
Var quantize_weights_mixed(Var w, Var coeffs, std::span<const int> bits);

// Differentiable aggregated activation quantizer: alpha * sum_i coeffs_i * X^i.
Var quantize_activations_mixed(Var x, Var alpha, Var coeffs, std::span<const int> bits);

} // namespace mixbit
