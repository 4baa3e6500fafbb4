// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bd/bitplane.hpp"
#include "net/network.hpp"

namespace mixbit {

// One convolution lowered for bit-plane execution. weight_bits == 0 marks a
// float layer (the unquantized stem and the classifier), which keeps f64
// weights instead of planes.
struct BDLayer {
    std::uint16_t out_channels = 0;
    std::uint16_t in_channels = 0;
    std::uint16_t kernel_h = 0;
    std::uint16_t kernel_w = 0;
    std::uint16_t stride = 1;
    std::uint16_t pad = 0;
    std::uint16_t weight_bits = 0; // M
    std::uint16_t act_bits = 0;    // K
    double alpha = 0.0;
    std::vector<double> bn_scale;
    std::vector<double> bn_shift;
    BitPlaneMatrix planes;           // c_o*M plane rows over s = c_i*kH*kW
    std::vector<double> float_weights; // c_o x s when weight_bits == 0

    bool quantized() const noexcept { return weight_bits > 0; }
    std::size_t patch_size() const noexcept { return std::size_t{in_channels} * kernel_h * kernel_w; }
    double weight_scale() const { return 2.0 / static_cast<double>((1u << weight_bits) - 1); }
    double act_scale() const { return alpha / static_cast<double>((1u << act_bits) - 1); }
    std::size_t plane_bytes() const noexcept { return planes.packed.size() * sizeof(std::uint64_t); }
};

// Program: every layer but the last is conv -> folded BN -> ReLU; then global
// average pooling; the last layer is the classifier stored as a 1x1 float conv
// whose shift holds the bias.
struct BDModel {
    std::vector<BDLayer> layers;
};

struct BDCounters {
    std::uint64_t and_word_ops = 0;
    std::uint64_t shift_adds = 0;
};

// Conv + folded BN (no ReLU) for one layer on an NCHW input.
Tensor bd_conv2d(const BDLayer& layer, const Tensor& input, BDCounters* counters = nullptr);

// Builds a BD layer from float weights already on the M-bit signed grid.
BDLayer make_bd_layer(const Tensor& quantized_weight, int weight_bits, int act_bits, double alpha,
                      std::size_t stride, std::size_t pad, std::vector<double> bn_scale, std::vector<double> bn_shift);

BDModel export_bd_model(const MixedPrecNet& net);
Tensor bd_infer(const BDModel& model, const Tensor& images, BDCounters* counters = nullptr);

void write_bd_model(const BDModel& model, const std::filesystem::path& path);
BDModel read_bd_model(const std::filesystem::path& path);

struct KernelBench {
    double median_ns = 0.0;
    std::uint64_t and_word_ops = 0;
    std::uint64_t shift_adds = 0;
};

// Times binary_gemm + recombine on prepacked random operands for a conv of
// c_in -> c_out channels, k x k kernel, producing out_hw x out_hw positions.
KernelBench bench_kernel(std::size_t c_in, std::size_t c_out, std::size_t kernel, std::size_t out_hw, int weight_bits,
                         int act_bits, std::size_t reps, std::uint64_t seed = 0);

} // namespace mixbit
