// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "search/strength.hpp"

namespace mixbit {

// One conv or dense layer. Quantized layers appear in the same order as plan entries.
struct LayerCost {
    std::string name;
    double macs = 0.0;
    bool quantized = false;
};

// macs*M*K/64 for a quantized layer, macs otherwise. M and K may be fractional.
double flop_pair(double macs, double weight_bits, double act_bits, bool quantized = true);

// Sum of flop_pair with the integer bitwidths of the plan plus unquantized macs.
// Bypass entries (32 bits) count as full-precision MACs.
double network_flops(const NetworkPlan& plan, std::span<const LayerCost> costs);

// Full-precision cost: every layer counted at one FLOP per MAC.
double full_precision_flops(std::span<const LayerCost> costs);

struct ExpectedFlops {
    double flops = 0.0;
    // d flops / d strength, per quantized layer.
    std::vector<LayerStrengths> grad;
    std::vector<double> per_layer;
};

// Cost evaluated at the strength-weighted effective bitwidths of every quantized layer.
ExpectedFlops expected_flops(std::span<const LayerCost> costs, std::span<const LayerStrengths> strengths,
                             const BitwidthSet& bits);

// lambda * max(0, expected - target); zero subgradient at equality.
double flops_penalty(double expected, double target, double lambda);
double flops_penalty_slope(double expected, double target, double lambda);

struct CostReport {
    double expected_mflops = 0.0;
    double target_mflops = 0.0;
    double penalty = 0.0;
    std::vector<double> per_layer_mflops;
};

CostReport make_cost_report(const ExpectedFlops& expected, double target_mflops, double lambda);

inline constexpr double kMega = 1e6;

} // namespace mixbit
