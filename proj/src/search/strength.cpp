// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "search/strength.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace mixbit {

BitwidthSet::BitwidthSet(std::vector<int> bits) : bits_(std::move(bits))
{
    require(!bits_.empty(), ErrorKind::InvalidArgument, "bitwidth set must be non-empty");
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        require(bits_[i] >= 1 && bits_[i] <= 16, ErrorKind::InvalidArgument,
                "bitwidth " + std::to_string(bits_[i]) + " outside [1,16]");
        require(i == 0 || bits_[i] > bits_[i - 1], ErrorKind::InvalidArgument,
                "bitwidth set must be strictly increasing without duplicates");
    }
}

bool BitwidthSet::contains(int b) const { return std::find(bits_.begin(), bits_.end(), b) != bits_.end(); }

std::string BitwidthSet::str() const
{
    std::string s = "{";
    for (std::size_t i = 0; i < bits_.size(); ++i)
        s += (i ? "," : "") + std::to_string(bits_[i]);
    return s + "}";
}

std::vector<double> softmax_coeffs(std::span<const double> strengths)
{
    require(!strengths.empty(), ErrorKind::InvalidArgument, "softmax of empty strengths");
    const double mx = *std::max_element(strengths.begin(), strengths.end());
    std::vector<double> out(strengths.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        require(std::isfinite(strengths[i]), ErrorKind::Numeric, "non-finite strength");
        out[i] = std::exp(strengths[i] - mx);
        sum += out[i];
    }
    for (auto& v : out)
        v /= sum;
    return out;
}

std::vector<double> gumbel_noise(std::size_t n, Rng& rng)
{
    // Open interval (0,1) so both logs stay finite.
    std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
    std::vector<double> g(n);
    for (auto& v : g) {
        double x = u(rng);
        while (x >= 1.0)
            x = u(rng);
        v = -std::log(-std::log(x));
    }
    return g;
}

std::vector<double> gumbel_coeffs(std::span<const double> strengths, std::span<const double> noise, double tau)
{
    require(tau > 0.0, ErrorKind::InvalidArgument, "gumbel temperature must be positive");
    require(noise.size() == strengths.size(), ErrorKind::InvalidArgument, "gumbel noise size mismatch");
    const double mx = *std::max_element(strengths.begin(), strengths.end());
    double sum = 0.0;
    for (double r : strengths)
        sum += std::exp(r - mx);
    const double log_norm = mx + std::log(sum);
    std::vector<double> z(strengths.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = (strengths[i] - log_norm + noise[i]) / tau;
    return softmax_coeffs(z);
}

std::vector<double> gumbel_coeffs(std::span<const double> strengths, double tau, Rng& rng)
{
    const auto g = gumbel_noise(strengths.size(), rng);
    return gumbel_coeffs(strengths, g, tau);
}

Tensor aggregate_quantized(std::span<const Tensor> branches, std::span<const double> coeffs)
{
    require(!branches.empty() && branches.size() == coeffs.size(), ErrorKind::InvalidArgument,
            "aggregate_quantized: " + std::to_string(branches.size()) + " branches for " + std::to_string(coeffs.size())
                + " coefficients");
    Tensor out = Tensor::zeros_like(branches[0]);
    for (std::size_t i = 0; i < branches.size(); ++i) {
        require(branches[i].same_shape(branches[0]), ErrorKind::InvalidArgument, "aggregate_quantized: shape mismatch");
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] += coeffs[i] * branches[i][k];
    }
    return out;
}

std::size_t strongest_index(std::span<const double> strengths)
{
    require(!strengths.empty(), ErrorKind::InvalidArgument, "argmax of empty strengths");
    std::size_t best = 0;
    for (std::size_t i = 1; i < strengths.size(); ++i)
        if (strengths[i] > strengths[best])
            best = i;
    return best;
}

NetworkPlan select_plan(std::span<const LayerStrengths> strengths, const BitwidthSet& bits)
{
    NetworkPlan plan;
    for (const auto& layer : strengths) {
        require(layer.weight.size() == bits.size() && layer.activation.size() == bits.size(),
                ErrorKind::InvalidArgument, "select_plan: strength length does not match bitwidth set");
        plan.layers.push_back({bits[strongest_index(layer.weight)], bits[strongest_index(layer.activation)]});
    }
    return plan;
}

namespace {

// dL/dz for c = softmax(z): c_j * (g_j - sum_i c_i g_i)
std::vector<double> softmax_backward(std::span<const double> c, std::span<const double> g)
{
    double dotp = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        dotp += c[i] * g[i];
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        out[i] = c[i] * (g[i] - dotp);
    return out;
}

} // namespace

Var softmax_var(Var strengths)
{
    const auto c = softmax_coeffs(strengths.value().data());
    Tape& tape = *strengths.tape;
    Tensor out({c.size()}, c);
    return tape.record("softmax", out, {strengths}, [&tape, strengths, c](const Tensor& g) {
        const auto d = softmax_backward(c, g.data());
        tape.accumulate(strengths, d);
    });
}

Var gumbel_softmax_var(Var strengths, std::span<const double> noise, double tau)
{
    const auto p = softmax_coeffs(strengths.value().data());
    const auto c = gumbel_coeffs(strengths.value().data(), noise, tau);
    Tape& tape = *strengths.tape;
    Tensor out({c.size()}, c);
    return tape.record("gumbel_softmax", out, {strengths}, [&tape, strengths, p, c, tau](const Tensor& g) {
        // c = softmax(z), z = (log p + noise)/tau, log p = log_softmax(r).
        auto dz = softmax_backward(c, g.data());
        double sum = 0.0;
        for (auto& v : dz) {
            v /= tau;
            sum += v;
        }
        std::vector<double> dr(dz.size());
        for (std::size_t i = 0; i < dz.size(); ++i)
            dr[i] = dz[i] - p[i] * sum;
        tape.accumulate(strengths, dr);
    });
}

} // namespace mixbit
