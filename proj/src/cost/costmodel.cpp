// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cost/costmodel.hpp"

#include <algorithm>

#include "error.hpp"
#include "quant/quantizer.hpp"

namespace mixbit {

double flop_pair(double macs, double weight_bits, double act_bits, bool quantized)
{
    if (!quantized)
        return macs;
    require(weight_bits > 0.0 && act_bits > 0.0, ErrorKind::InvalidArgument, "flop_pair: bitwidths must be positive");
    return macs * weight_bits * act_bits / 64.0;
}

double network_flops(const NetworkPlan& plan, std::span<const LayerCost> costs)
{
    double total = 0.0;
    std::size_t q = 0;
    for (const auto& c : costs) {
        if (!c.quantized) {
            total += c.macs;
            continue;
        }
        require(q < plan.layers.size(), ErrorKind::InvalidArgument,
                "network_flops: plan has no entry for quantized layer " + std::to_string(q) + " (" + c.name + ")");
        const auto& lb = plan.layers[q++];
        if (lb.weight_bits == kBypassBits || lb.act_bits == kBypassBits)
            total += c.macs;
        else
            total += flop_pair(c.macs, lb.weight_bits, lb.act_bits);
    }
    require(q == plan.layers.size(), ErrorKind::InvalidArgument,
            "network_flops: plan has " + std::to_string(plan.layers.size()) + " entries for " + std::to_string(q)
                + " quantized layers");
    return total;
}

double full_precision_flops(std::span<const LayerCost> costs)
{
    double total = 0.0;
    for (const auto& c : costs)
        total += c.macs;
    return total;
}

ExpectedFlops expected_flops(std::span<const LayerCost> costs, std::span<const LayerStrengths> strengths,
                             const BitwidthSet& bits)
{
    ExpectedFlops out;
    std::size_t q = 0;
    for (const auto& c : costs) {
        if (!c.quantized) {
            out.flops += c.macs;
            out.per_layer.push_back(c.macs);
            continue;
        }
        require(q < strengths.size(), ErrorKind::InvalidArgument,
                "expected_flops: missing strengths for quantized layer " + std::to_string(q));
        const auto& st = strengths[q++];
        require(st.weight.size() == bits.size() && st.activation.size() == bits.size(), ErrorKind::InvalidArgument,
                "expected_flops: strength length does not match bitwidth set");
        const auto pw = softmax_coeffs(st.weight);
        const auto px = softmax_coeffs(st.activation);
        double mw = 0.0, kx = 0.0;
        for (std::size_t i = 0; i < bits.size(); ++i) {
            mw += pw[i] * bits[i];
            kx += px[i] * bits[i];
        }
        const double cost = flop_pair(c.macs, mw, kx);
        out.flops += cost;
        out.per_layer.push_back(cost);

        // d cost/d M = macs*K/64; d M/d r_i = p_i (b_i - M).
        LayerStrengths g;
        g.weight.resize(bits.size());
        g.activation.resize(bits.size());
        for (std::size_t i = 0; i < bits.size(); ++i) {
            g.weight[i] = c.macs * kx / 64.0 * pw[i] * (bits[i] - mw);
            g.activation[i] = c.macs * mw / 64.0 * px[i] * (bits[i] - kx);
        }
        out.grad.push_back(std::move(g));
    }
    require(q == strengths.size(), ErrorKind::InvalidArgument, "expected_flops: more strengths than quantized layers");
    return out;
}

double flops_penalty(double expected, double target, double lambda)
{
    require(lambda >= 0.0, ErrorKind::InvalidArgument, "flops_penalty: lambda must be non-negative");
    return lambda * std::max(0.0, expected - target);
}

double flops_penalty_slope(double expected, double target, double lambda) { return expected > target ? lambda : 0.0; }

CostReport make_cost_report(const ExpectedFlops& expected, double target_mflops, double lambda)
{
    CostReport r;
    r.expected_mflops = expected.flops / kMega;
    r.target_mflops = target_mflops;
    r.penalty = flops_penalty(r.expected_mflops, target_mflops, lambda);
    for (double f : expected.per_layer)
        r.per_layer_mflops.push_back(f / kMega);
    return r;
}

} // namespace mixbit
