// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "numerics/tape.hpp"

namespace mixbit {

// Candidate bitwidths: non-empty, strictly increasing, all >= 1.
class BitwidthSet {
public:
    BitwidthSet() : bits_{1, 2, 3, 4, 5} {}
    explicit BitwidthSet(std::vector<int> bits);

    std::span<const int> bits() const noexcept { return bits_; }
    std::size_t size() const noexcept { return bits_.size(); }
    int operator[](std::size_t i) const { return bits_.at(i); }
    int smallest() const { return bits_.front(); }
    int largest() const { return bits_.back(); }
    bool contains(int b) const;
    std::string str() const;

    friend bool operator==(const BitwidthSet&, const BitwidthSet&) = default;

private:
    std::vector<int> bits_;
};

enum class StrengthRole { Weight, Activation };

struct LayerBits {
    int weight_bits = 0;
    int act_bits = 0;
    friend bool operator==(const LayerBits&, const LayerBits&) = default;
};

// Selected (weight, activation) bitwidth per quantized layer, in layer order.
struct NetworkPlan {
    std::vector<LayerBits> layers;

    static NetworkPlan uniform(std::size_t layer_count, int bits) { return {std::vector<LayerBits>(layer_count, {bits, bits})}; }
    friend bool operator==(const NetworkPlan&, const NetworkPlan&) = default;
};

// softmax with max subtraction.
std::vector<double> softmax_coeffs(std::span<const double> strengths);

// Standard Gumbel(0,1) draws.
std::vector<double> gumbel_noise(std::size_t n, Rng& rng);

// softmax((log softmax(r) + g) / tau) for given noise g.
std::vector<double> gumbel_coeffs(std::span<const double> strengths, std::span<const double> noise, double tau);
// Same with freshly drawn noise.
std::vector<double> gumbel_coeffs(std::span<const double> strengths, double tau, Rng& rng);

// Elementwise convex combination sum_i coeffs_i * branches_i.
Tensor aggregate_quantized(std::span<const Tensor> branches, std::span<const double> coeffs);

// Index of the largest strength; ties go to the lowest index (smallest bitwidth).
std::size_t strongest_index(std::span<const double> strengths);

struct LayerStrengths {
    std::vector<double> weight;
    std::vector<double> activation;
};

NetworkPlan select_plan(std::span<const LayerStrengths> strengths, const BitwidthSet& bits);

// Differentiable coefficient ops for the search forward pass.
Var softmax_var(Var strengths);
Var gumbel_softmax_var(Var strengths, std::span<const double> noise, double tau);

} // namespace mixbit
