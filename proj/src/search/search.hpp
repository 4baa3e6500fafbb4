// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cost/costmodel.hpp"
#include "data/dataset.hpp"
#include "net/network.hpp"
#include "search/strength.hpp"

namespace mixbit {

struct SearchStepParams {
    double weight_lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double strength_lr = 0.02;
    double lambda = 0.06;
    double target_mflops = 0.0;
    double tau = 1.0;
    Rng* rng = nullptr;
};

struct SearchStepResult {
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double expected_mflops = 0.0;
};

// One bilevel iteration: an SGD step on weights, BN affine and alpha using the
// train batch, then an Adam step on every r and s using the valid batch plus
// the FLOPs hinge.
SearchStepResult search_step(MixedPrecNet& net, const Batch& train, const Batch& valid,
                             const SearchStepParams& params);

struct SearchConfig {
    std::size_t epochs = 40;
    std::size_t batch_size = 64;
    double weight_lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double strength_lr = 0.02;
    double lambda = 0.06;
    double target_mflops = 0.0;
    bool stochastic = false;
    double tau_start = 1.0;
    double tau_end = 0.4;
    // Weight-only epochs with frozen strengths before the bilevel loop.
    std::size_t warmup_epochs = 0;
    std::uint64_t seed = 0;
    std::string split = "train";
};

struct HistoryRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double valid_acc = 0.0;
    double expected_mflops = 0.0;
    double tau = 0.0;
};

struct SearchResult {
    NetworkPlan plan;
    std::vector<HistoryRow> history;
    std::vector<LayerStrengths> best_strengths;
    // 0 when no epoch ran; otherwise the 1-based epoch with the best valid accuracy.
    std::size_t best_epoch = 0;
    double best_valid_acc = 0.0;
};

double tau_at_epoch(const SearchConfig& config, std::size_t epoch);

SearchResult run_search(MixedPrecNet& net, const Dataset& data, const SearchConfig& config);

inline constexpr std::size_t kRandomPlanMaxDraws = 10000;

// Rejection sampling of uniform per-layer bitwidths until the plan's FLOPs lie
// in [lo, hi] (raw FLOPs, not millions).
NetworkPlan sample_random_plan(const BitwidthSet& bits, std::span<const LayerCost> costs, double lo, double hi,
                               Rng& rng);

// Reference for the multi-weight formulation: one quantized weight and one
// convolution per candidate bitwidth, outputs mixed by softmax(r). `input` is
// the already-quantized activation.
Tensor dnas_reference_forward(const Tensor& input, std::span<const Tensor> branch_weights,
                              std::span<const double> weight_strengths, const BitwidthSet& bits, std::size_t stride,
                              std::size_t pad, std::size_t& conv_calls);

// The single-meta-weight counterpart: aggregate quantized weights, then one convolution.
Tensor ebs_reference_forward(const Tensor& input, const Tensor& weight, std::span<const double> weight_strengths,
                             const BitwidthSet& bits, std::size_t stride, std::size_t pad, std::size_t& conv_calls);

} // namespace mixbit
