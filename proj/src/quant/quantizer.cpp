// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quant/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace mixbit {

namespace {

void check_bits(int bits)
{
    if (bits < 1 || bits > 16)
        fail(ErrorKind::InvalidArgument, "bitwidth must be in [1,16], got " + std::to_string(bits));
}

void check_branches(const Tensor& coeffs, std::span<const int> bits)
{
    require(!bits.empty() && coeffs.size() == bits.size(), ErrorKind::InvalidArgument,
            "quantizer: " + std::to_string(coeffs.size()) + " coefficients for " + std::to_string(bits.size())
                + " bitwidths");
    for (int b : bits)
        check_bits(b);
}

} // namespace

double round_half_up(double x) { return std::floor(x + 0.5); }

double quantize_grid(double x, int bits)
{
    check_bits(bits);
    if (!(x >= -1e-9 && x <= 1.0 + 1e-9))
        fail(ErrorKind::InvalidArgument, "quantize_grid: input " + std::to_string(x) + " outside [0,1]");
    const double levels = grid_levels(bits);
    return round_half_up(levels * std::clamp(x, 0.0, 1.0)) / levels;
}

std::uint32_t grid_code(double x, int bits)
{
    check_bits(bits);
    return static_cast<std::uint32_t>(round_half_up(grid_levels(bits) * std::clamp(x, 0.0, 1.0)));
}

Tensor normalize_weights(const Tensor& w)
{
    require(!w.empty(), ErrorKind::InvalidArgument, "quantize_weights: empty tensor");
    Tensor v = Tensor::zeros_like(w);
    double mx = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = std::tanh(w[i]);
        mx = std::max(mx, std::abs(v[i]));
    }
    if (mx == 0.0)
        return {};
    for (auto& t : v.data())
        t = t / (2.0 * mx) + 0.5;
    return v;
}

Tensor quantize_weights(const Tensor& w, int bits)
{
    check_bits(bits);
    Tensor v = normalize_weights(w);
    if (v.empty())
        return Tensor::zeros_like(w);
    for (auto& t : v.data())
        t = 2.0 * quantize_grid(t, bits) - 1.0;
    return v;
}

Tensor quantize_activations(const Tensor& x, double alpha, int bits)
{
    require(alpha > 0.0, ErrorKind::InvalidArgument, "quantize_activations: alpha must be positive");
    check_bits(bits);
    Tensor out = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = alpha * quantize_grid(std::clamp(x[i], 0.0, alpha) / alpha, bits);
    return out;
}

Tensor ste_backward(const Tensor& upstream, const Tensor& x, double alpha)
{
    require(upstream.same_shape(x), ErrorKind::InvalidArgument, "ste_backward: shape mismatch");
    Tensor out = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x[i] <= alpha ? upstream[i] : 0.0;
    return out;
}

double alpha_gradient(const Tensor& x, double alpha, std::span<const double> coeffs, std::span<const int> bits,
                      const Tensor& upstream)
{
    require(alpha > 0.0, ErrorKind::InvalidArgument, "alpha_gradient: alpha must be positive");
    require(coeffs.size() == bits.size() && !bits.empty(), ErrorKind::InvalidArgument,
            "alpha_gradient: coefficient/bitwidth count mismatch");
    require(upstream.same_shape(x), ErrorKind::InvalidArgument, "alpha_gradient: shape mismatch");
    double csum = 0.0;
    for (double c : coeffs) {
        require(c >= 0.0, ErrorKind::InvalidArgument, "alpha_gradient: negative coefficient");
        csum += c;
    }
    require(std::abs(csum - 1.0) < 1e-9, ErrorKind::InvalidArgument, "alpha_gradient: coefficients must sum to 1");

    double total = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e) {
        double d;
        if (x[e] > alpha) {
            d = 1.0;
        } else {
            const double xt = std::max(x[e], 0.0) / alpha;
            d = 0.0;
            for (std::size_t i = 0; i < bits.size(); ++i)
                d += coeffs[i] * (quantize_grid(xt, bits[i]) - xt);
        }
        total += d * upstream[e];
    }
    return total;
}

void project_alpha(Param& alpha)
{
    for (auto& a : alpha.value.data())
        a = std::max(a, kAlphaFloor);
}

Var quantize_weights_mixed(Var w, Var coeffs, std::span<const int> bits)
{
    const Tensor& wv = w.value();
    const Tensor& cv = coeffs.value();
    check_branches(cv, bits);

    const Tensor v = normalize_weights(wv);
    std::vector<Tensor> branches;
    branches.reserve(bits.size());
    Tensor out = Tensor::zeros_like(wv);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        Tensor br = Tensor::zeros_like(wv);
        if (!v.empty())
            for (std::size_t k = 0; k < wv.size(); ++k)
                br[k] = 2.0 * quantize_grid(v[k], bits[i]) - 1.0;
        for (std::size_t k = 0; k < wv.size(); ++k)
            out[k] += cv[i] * br[k];
        branches.push_back(std::move(br));
    }

    Tape& tape = *w.tape;
    return tape.record("quantize_weights_mixed", std::move(out), {w, coeffs},
                       [&tape, w, coeffs, branches = std::move(branches)](const Tensor& g) {
                           const Tensor& wv = w.value();
                           const Tensor& cv = coeffs.value();
                           if (tape.requires_grad(coeffs)) {
                               Tensor dc = Tensor::zeros_like(cv);
                               for (std::size_t i = 0; i < branches.size(); ++i) {
                                   double acc = 0.0;
                                   for (std::size_t k = 0; k < g.size(); ++k)
                                       acc += g[k] * branches[i][k];
                                   dc[i] = acc;
                               }
                               tape.accumulate(coeffs, dc.data());
                           }
                           if (!tape.requires_grad(w))
                               return;
                           double csum = 0.0;
                           for (double c : cv.data())
                               csum += c;
                           // d out / d v = 2 * sum(c) under straight-through rounding.
                           Tensor t = Tensor::zeros_like(wv);
                           double m = 0.0;
                           std::size_t argmax = 0;
                           for (std::size_t k = 0; k < wv.size(); ++k) {
                               t[k] = std::tanh(wv[k]);
                               if (std::abs(t[k]) > m) {
                                   m = std::abs(t[k]);
                                   argmax = k;
                               }
                           }
                           Tensor dw = Tensor::zeros_like(wv);
                           if (m == 0.0) {
                               // Degenerate all-zero weights: pass the gradient straight through.
                               for (std::size_t k = 0; k < wv.size(); ++k)
                                   dw[k] = g[k];
                               tape.accumulate(w, dw.data());
                               return;
                           }
                           double gt = 0.0;
                           for (std::size_t k = 0; k < wv.size(); ++k) {
                               const double gv = 2.0 * csum * g[k];
                               gt += gv * t[k];
                               dw[k] = gv * (1.0 - t[k] * t[k]) / (2.0 * m);
                           }
                           const double sgn = t[argmax] > 0.0 ? 1.0 : -1.0;
                           dw[argmax] -= sgn * (1.0 - t[argmax] * t[argmax]) / (2.0 * m * m) * gt;
                           tape.accumulate(w, dw.data());
                       });
}

Var quantize_activations_mixed(Var x, Var alpha, Var coeffs, std::span<const int> bits)
{
    const Tensor& xv = x.value();
    const Tensor& cv = coeffs.value();
    check_branches(cv, bits);
    require(alpha.value().size() == 1, ErrorKind::InvalidArgument, "activation quantizer: alpha must be a scalar");
    const double a = alpha.value()[0];
    require(a > 0.0, ErrorKind::InvalidArgument, "activation quantizer: alpha must be positive");

    Tensor out = Tensor::zeros_like(xv);
    for (std::size_t k = 0; k < xv.size(); ++k) {
        const double xt = std::clamp(xv[k], 0.0, a) / a;
        double acc = 0.0;
        for (std::size_t i = 0; i < bits.size(); ++i)
            acc += cv[i] * quantize_grid(xt, bits[i]);
        out[k] = a * acc;
    }

    Tape& tape = *x.tape;
    std::vector<int> bv(bits.begin(), bits.end());
    return tape.record("quantize_activations_mixed", std::move(out), {x, alpha, coeffs},
                       [&tape, x, alpha, coeffs, bv = std::move(bv)](const Tensor& g) {
                           const Tensor& xv = x.value();
                           const Tensor& cv = coeffs.value();
                           const double a = alpha.value()[0];
                           double csum = 0.0;
                           for (double c : cv.data())
                               csum += c;
                           Tensor dx = Tensor::zeros_like(xv);
                           Tensor dc = Tensor::zeros_like(cv);
                           double da = 0.0;
                           for (std::size_t k = 0; k < xv.size(); ++k) {
                               const double gk = g[k];
                               if (xv[k] > a) {
                                   da += gk * csum;
                                   for (std::size_t i = 0; i < bv.size(); ++i)
                                       dc[i] += gk * a;
                                   continue;
                               }
                               dx[k] = gk * csum;
                               const double xt = std::max(xv[k], 0.0) / a;
                               double dak = 0.0;
                               for (std::size_t i = 0; i < bv.size(); ++i) {
                                   const double q = quantize_grid(xt, bv[i]);
                                   dak += cv[i] * (q - xt);
                                   dc[i] += gk * a * q;
                               }
                               da += gk * dak;
                           }
                           tape.accumulate(x, dx.data());
                           const double dav[1] = {da};
                           tape.accumulate(alpha, dav);
                           tape.accumulate(coeffs, dc.data());
                       });
}

} // namespace mixbit
