// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cost/costmodel.hpp"
#include "data/dataset.hpp"
#include "numerics/ops.hpp"
#include "search/strength.hpp"

namespace mixbit {

enum class LayerKind { Conv, Dense, BatchNorm, Relu, AvgPool, ResidualAdd };

const char* layer_kind_name(LayerKind kind);

// One step of the layer program. Values flow through numbered registers;
// register 0 holds the network input.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    std::string name;
    int in = 0;
    int in2 = -1;
    int out = 0;
    // Index into the conv, bn or dense unit list for parameterised kinds.
    int unit = -1;
};

// Learnable search state of one quantized layer.
struct QuantSite {
    Param alpha;
    Param weight_strength;     // r
    Param activation_strength; // s
};

struct ConvUnit {
    std::string name;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t pad = 0;
    std::size_t in_h = 0;
    std::size_t in_w = 0;
    bool quantize = false;
    int qindex = -1;
    // The single meta weight, OIHW, shared by every candidate bitwidth.
    Param weight;

    std::size_t out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    std::size_t out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
    double macs() const
    {
        return static_cast<double>(out_channels * in_channels * kernel * kernel * out_h() * out_w());
    }
};

struct BatchNormUnit {
    std::string name;
    Param gamma;
    Param beta;
    BatchNormState state;
};

struct DenseUnit {
    std::string name;
    Param weight;
    Param bias;
};

enum class NetMode { SearchDeterministic, SearchStochastic, Fixed };

struct ForwardOptions {
    bool training = false;
    // Gumbel temperature for stochastic search.
    double tau = 1.0;
    // Source of fresh Gumbel noise in stochastic mode.
    Rng* rng = nullptr;
    // Per quantized layer: {weight noise, activation noise}. Overrides rng.
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>* frozen_noise = nullptr;
};

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
    std::vector<std::int32_t> predictions;
};

class MixedPrecNet {
public:
    static MixedPrecNet resnet20(int num_classes, BitwidthSet bits, std::uint64_t seed, std::size_t input_hw = 32);
    static MixedPrecNet tinynet(int num_classes, BitwidthSet bits, std::uint64_t seed, std::size_t input_hw = 16);
    static MixedPrecNet build(const std::string& arch, int num_classes, BitwidthSet bits, std::uint64_t seed,
                              std::size_t input_hw = 0);

    const std::string& arch() const noexcept { return arch_; }
    int num_classes() const noexcept { return num_classes_; }
    std::size_t input_hw() const noexcept { return input_hw_; }
    const BitwidthSet& bits() const noexcept { return bits_; }
    const std::vector<LayerSpec>& layers() const noexcept { return program_; }

    std::size_t quantized_layer_count() const noexcept { return sites_.size(); }
    std::vector<LayerCost> layer_costs() const;
    std::size_t parameter_count() const;

    NetMode mode() const noexcept { return mode_; }
    void set_search_mode(bool stochastic);
    void set_fixed_plan(NetworkPlan plan);
    const std::optional<NetworkPlan>& plan() const noexcept { return plan_; }

    // Runs the layer program on the tape. Parameters are bound as leaves so
    // backward() fills every Param::grad.
    Var forward(Tape& tape, const Tensor& images, const ForwardOptions& options);
    // Forward without recording gradients; BN in eval mode.
    Tensor predict_logits(const Tensor& images);

    // Convolutions issued per quantized layer during the last forward.
    const std::vector<std::size_t>& conv_calls() const noexcept { return conv_calls_; }
    // Stored meta weight tensors of quantized layer q (always one).
    std::size_t meta_weight_tensors(std::size_t q) const;

    // Parameter groups.
    std::vector<Param*> weight_params();  // conv/dense weights, dense bias
    std::vector<Param*> bn_params();      // gamma/beta
    std::vector<Param*> alpha_params();
    std::vector<Param*> strength_params(); // r then s per layer
    void zero_grads();

    std::vector<LayerStrengths> strengths() const;
    void set_strengths(const std::vector<LayerStrengths>& strengths);
    std::vector<double> alphas() const;
    void set_alphas(const std::vector<double>& alphas);

    // Weight tensors and BN statistics by name, in a fixed order. Excludes
    // alpha and strengths (bitwidth-set dependent state).
    std::vector<std::pair<std::string, Tensor*>> named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;

    bool bn_frozen() const noexcept { return bn_frozen_; }
    void set_bn_frozen(bool frozen) { bn_frozen_ = frozen; }

    std::vector<ConvUnit>& convs() noexcept { return convs_; }
    const std::vector<ConvUnit>& convs() const noexcept { return convs_; }
    const std::vector<BatchNormUnit>& bns() const noexcept { return bns_; }
    const std::vector<DenseUnit>& denses() const noexcept { return denses_; }
    const std::vector<QuantSite>& sites() const noexcept { return sites_; }

private:
    MixedPrecNet(std::string arch, int num_classes, BitwidthSet bits, std::size_t input_hw);

    int add_conv(const std::string& name, int in, std::size_t cin, std::size_t cout, std::size_t kernel,
                 std::size_t stride, std::size_t hw, bool quantize, Rng& rng);
    int add_bn(const std::string& name, int in, std::size_t channels);
    int add_relu(int in);
    int add_step(LayerSpec spec);
    int new_register() { return next_register_++; }

    Var conv_forward(Tape& tape, ConvUnit& unit, Var x, const ForwardOptions& options);

    std::string arch_;
    int num_classes_ = 0;
    BitwidthSet bits_;
    std::size_t input_hw_ = 0;
    std::vector<LayerSpec> program_;
    std::vector<ConvUnit> convs_;
    std::vector<BatchNormUnit> bns_;
    std::vector<DenseUnit> denses_;
    std::vector<QuantSite> sites_;
    int next_register_ = 1;
    int output_register_ = 0;
    NetMode mode_ = NetMode::SearchDeterministic;
    std::optional<NetworkPlan> plan_;
    std::vector<std::size_t> conv_calls_;
    bool bn_frozen_ = false;
};

Var forward_search(MixedPrecNet& net, Tape& tape, const Tensor& images, const ForwardOptions& options);
Var forward_fixed(MixedPrecNet& net, Tape& tape, const Tensor& images, const NetworkPlan& plan,
                  const ForwardOptions& options);

EvalResult evaluate(MixedPrecNet& net, const Dataset& data, std::span<const std::size_t> indices,
                    std::size_t batch_size = 256);

struct RetrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 128;
    double lr = 0.04;
    double momentum = 0.9;
    // Applied to weights; alpha gets it too unless the plan is low-bit.
    double weight_decay_high = 5e-4;
    double weight_decay_low = 1e-4;
    bool augment = false;
    std::uint64_t seed = 0;
    std::string train_split = "train";
    std::string test_split = "test";
};

struct RetrainMetrics {
    std::size_t epochs_run = 0;
    double final_train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    bool low_bit = false;
};

// A plan is low-bit when its mean quantized bitwidth is below 3.
bool is_low_bit(const NetworkPlan& plan);

// Fixed-plan retraining with SGD + momentum and cosine lr; no strengths, no FLOPs term.
RetrainMetrics retrain(MixedPrecNet& net, const Dataset& data, const NetworkPlan& plan, const RetrainConfig& config);

} // namespace mixbit
