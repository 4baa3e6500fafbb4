// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "net/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "error.hpp"
#include "numerics/optim.hpp"
#include "quant/quantizer.hpp"

namespace mixbit {

const char* layer_kind_name(LayerKind kind)
{
    switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Dense: return "dense";
    case LayerKind::BatchNorm: return "bn";
    case LayerKind::Relu: return "relu";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::ResidualAdd: return "residual-add";
    }
    return "unknown";
}

MixedPrecNet::MixedPrecNet(std::string arch, int num_classes, BitwidthSet bits, std::size_t input_hw)
    : arch_(std::move(arch)), num_classes_(num_classes), bits_(std::move(bits)), input_hw_(input_hw)
{
    require(num_classes >= 2, ErrorKind::InvalidArgument, "network needs at least 2 classes");
}

int MixedPrecNet::add_step(LayerSpec spec)
{
    program_.push_back(std::move(spec));
    return program_.back().out;
}

int MixedPrecNet::add_conv(const std::string& name, int in, std::size_t cin, std::size_t cout, std::size_t kernel,
                           std::size_t stride, std::size_t hw, bool quantize, Rng& rng)
{
    ConvUnit u;
    u.name = name;
    u.in_channels = cin;
    u.out_channels = cout;
    u.kernel = kernel;
    u.stride = stride;
    u.pad = kernel / 2;
    u.in_h = u.in_w = hw;
    u.quantize = quantize;
    const double fan_in = static_cast<double>(cin * kernel * kernel);
    u.weight = Param(name + ".weight", randn({cout, cin, kernel, kernel}, std::sqrt(2.0 / fan_in), rng));
    if (quantize) {
        u.qindex = static_cast<int>(sites_.size());
        QuantSite site;
        site.alpha = Param(name + ".alpha", Tensor({1}, kAlphaInit));
        site.weight_strength = Param(name + ".r", Tensor({bits_.size()}));
        site.activation_strength = Param(name + ".s", Tensor({bits_.size()}));
        sites_.push_back(std::move(site));
    }
    convs_.push_back(std::move(u));
    LayerSpec spec{LayerKind::Conv, name, in, -1, new_register(), static_cast<int>(convs_.size() - 1)};
    return add_step(spec);
}

int MixedPrecNet::add_bn(const std::string& name, int in, std::size_t channels)
{
    BatchNormUnit b;
    b.name = name;
    b.gamma = Param(name + ".gamma", Tensor({channels}, 1.0));
    b.beta = Param(name + ".beta", Tensor({channels}, 0.0));
    b.state.running_mean = Tensor({channels}, 0.0);
    b.state.running_var = Tensor({channels}, 1.0);
    bns_.push_back(std::move(b));
    return add_step({LayerKind::BatchNorm, name, in, -1, new_register(), static_cast<int>(bns_.size() - 1)});
}

int MixedPrecNet::add_relu(int in) { return add_step({LayerKind::Relu, "relu", in, -1, new_register(), -1}); }

MixedPrecNet MixedPrecNet::resnet20(int num_classes, BitwidthSet bits, std::uint64_t seed, std::size_t input_hw)
{
    MixedPrecNet net("resnet20", num_classes, std::move(bits), input_hw);
    Rng rng(seed);
    int x = net.add_conv("conv1", 0, 3, 16, 3, 1, input_hw, false, rng);
    x = net.add_relu(net.add_bn("bn1", x, 16));
    std::size_t cin = 16, hw = input_hw;
    for (std::size_t stage = 0; stage < 3; ++stage) {
        const std::size_t cout = std::size_t{16} << stage;
        for (std::size_t block = 0; block < 3; ++block) {
            const std::size_t stride = (stage > 0 && block == 0) ? 2 : 1;
            const std::string name = "layer" + std::to_string(stage + 1) + "." + std::to_string(block);
            const std::size_t out_hw = (hw + 2 - 3) / stride + 1;
            int y = net.add_conv(name + ".conv1", x, cin, cout, 3, stride, hw, true, rng);
            y = net.add_relu(net.add_bn(name + ".bn1", y, cout));
            y = net.add_conv(name + ".conv2", y, cout, cout, 3, 1, out_hw, true, rng);
            y = net.add_bn(name + ".bn2", y, cout);
            int shortcut = x;
            if (stride != 1 || cin != cout) {
                shortcut = net.add_conv(name + ".shortcut", x, cin, cout, 1, stride, hw, true, rng);
                shortcut = net.add_bn(name + ".shortcut_bn", shortcut, cout);
            }
            const int sum = net.add_step({LayerKind::ResidualAdd, name + ".add", y, shortcut, net.new_register(), -1});
            x = net.add_relu(sum);
            cin = cout;
            hw = out_hw;
        }
    }
    x = net.add_step({LayerKind::AvgPool, "avgpool", x, -1, net.new_register(), -1});
    DenseUnit fc;
    fc.name = "fc";
    fc.weight = Param("fc.weight", randn({static_cast<std::size_t>(num_classes), cin}, std::sqrt(1.0 / cin), rng));
    fc.bias = Param("fc.bias", Tensor({static_cast<std::size_t>(num_classes)}));
    net.denses_.push_back(std::move(fc));
    net.output_register_ = net.add_step({LayerKind::Dense, "fc", x, -1, net.new_register(), 0});
    net.conv_calls_.assign(net.sites_.size(), 0);
    return net;
}

MixedPrecNet MixedPrecNet::tinynet(int num_classes, BitwidthSet bits, std::uint64_t seed, std::size_t input_hw)
{
    MixedPrecNet net("tinynet", num_classes, std::move(bits), input_hw);
    Rng rng(seed);
    int x = net.add_conv("conv1", 0, 3, 8, 3, 1, input_hw, false, rng);
    x = net.add_relu(net.add_bn("bn1", x, 8));
    struct Block {
        std::size_t cin, cout, stride;
    };
    const Block blocks[] = {{8, 16, 1}, {16, 32, 2}, {32, 32, 2}};
    std::size_t hw = input_hw;
    int i = 2;
    for (const auto& b : blocks) {
        const std::string name = "conv" + std::to_string(i);
        x = net.add_conv(name, x, b.cin, b.cout, 3, b.stride, hw, true, rng);
        x = net.add_relu(net.add_bn("bn" + std::to_string(i), x, b.cout));
        hw = (hw + 2 - 3) / b.stride + 1;
        ++i;
    }
    x = net.add_step({LayerKind::AvgPool, "avgpool", x, -1, net.new_register(), -1});
    DenseUnit fc;
    fc.name = "fc";
    fc.weight = Param("fc.weight", randn({static_cast<std::size_t>(num_classes), 32}, std::sqrt(1.0 / 32.0), rng));
    fc.bias = Param("fc.bias", Tensor({static_cast<std::size_t>(num_classes)}));
    net.denses_.push_back(std::move(fc));
    net.output_register_ = net.add_step({LayerKind::Dense, "fc", x, -1, net.new_register(), 0});
    net.conv_calls_.assign(net.sites_.size(), 0);
    return net;
}

MixedPrecNet MixedPrecNet::build(const std::string& arch, int num_classes, BitwidthSet bits, std::uint64_t seed,
                                 std::size_t input_hw)
{
    if (arch == "resnet20")
        return resnet20(num_classes, std::move(bits), seed, input_hw ? input_hw : 32);
    if (arch == "tinynet")
        return tinynet(num_classes, std::move(bits), seed, input_hw ? input_hw : 16);
    fail(ErrorKind::Config, "unknown architecture '" + arch + "' (expected resnet20 or tinynet)");
}

std::vector<LayerCost> MixedPrecNet::layer_costs() const
{
    std::vector<LayerCost> costs;
    for (const auto& step : program_) {
        if (step.kind == LayerKind::Conv) {
            const auto& u = convs_[static_cast<std::size_t>(step.unit)];
            costs.push_back({u.name, u.macs(), u.quantize});
        } else if (step.kind == LayerKind::Dense) {
            const auto& d = denses_[static_cast<std::size_t>(step.unit)];
            costs.push_back({d.name, static_cast<double>(d.weight.value.size()), false});
        }
    }
    return costs;
}

std::size_t MixedPrecNet::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& c : convs_)
        n += c.weight.value.size();
    for (const auto& b : bns_)
        n += b.gamma.value.size() + b.beta.value.size();
    for (const auto& d : denses_)
        n += d.weight.value.size() + d.bias.value.size();
    return n;
}

void MixedPrecNet::set_search_mode(bool stochastic)
{
    mode_ = stochastic ? NetMode::SearchStochastic : NetMode::SearchDeterministic;
    plan_.reset();
}

void MixedPrecNet::set_fixed_plan(NetworkPlan plan)
{
    require(plan.layers.size() == sites_.size(), ErrorKind::InvalidArgument,
            "plan has " + std::to_string(plan.layers.size()) + " entries, network has " + std::to_string(sites_.size())
                + " quantized layers");
    for (const auto& lb : plan.layers)
        for (int b : {lb.weight_bits, lb.act_bits})
            require(b == kBypassBits || (b >= 1 && b <= 16), ErrorKind::InvalidArgument,
                    "plan bitwidth " + std::to_string(b) + " is not valid");
    plan_ = std::move(plan);
    mode_ = NetMode::Fixed;
}

std::size_t MixedPrecNet::meta_weight_tensors(std::size_t q) const
{
    std::size_t n = 0;
    for (const auto& u : convs_)
        if (u.qindex == static_cast<int>(q) && !u.weight.value.empty())
            ++n;
    return n;
}

Var MixedPrecNet::conv_forward(Tape& tape, ConvUnit& u, Var x, const ForwardOptions& options)
{
    Var w = tape.param(u.weight);
    if (u.quantize) {
        auto& site = sites_[static_cast<std::size_t>(u.qindex)];
        const auto q = static_cast<std::size_t>(u.qindex);
        Var alpha = tape.param(site.alpha);
        if (mode_ == NetMode::Fixed) {
            const auto& lb = plan_->layers[q];
            if (lb.act_bits != kBypassBits) {
                const int b[1] = {lb.act_bits};
                x = quantize_activations_mixed(x, alpha, tape.constant(Tensor({1}, 1.0)), b);
            }
            if (lb.weight_bits != kBypassBits) {
                const int b[1] = {lb.weight_bits};
                w = quantize_weights_mixed(w, tape.constant(Tensor({1}, 1.0)), b);
            }
        } else {
            Var r = tape.param(site.weight_strength);
            Var s = tape.param(site.activation_strength);
            Var cw, cx;
            if (mode_ == NetMode::SearchDeterministic) {
                cw = softmax_var(r);
                cx = softmax_var(s);
            } else {
                std::vector<double> gw, gx;
                if (options.frozen_noise) {
                    gw = options.frozen_noise->at(q).first;
                    gx = options.frozen_noise->at(q).second;
                } else {
                    require(options.rng != nullptr, ErrorKind::State, "stochastic search forward needs an rng");
                    gw = gumbel_noise(bits_.size(), *options.rng);
                    gx = gumbel_noise(bits_.size(), *options.rng);
                }
                cw = gumbel_softmax_var(r, gw, options.tau);
                cx = gumbel_softmax_var(s, gx, options.tau);
            }
            x = quantize_activations_mixed(x, alpha, cx, bits_.bits());
            w = quantize_weights_mixed(w, cw, bits_.bits());
        }
        ++conv_calls_[q];
    }
    return conv2d(x, w, u.stride, u.pad);
}

Var MixedPrecNet::forward(Tape& tape, const Tensor& images, const ForwardOptions& options)
{
    require(images.rank() == 4 && images.dim(1) == 3, ErrorKind::InvalidArgument,
            "network input must be N x 3 x H x W, got " + shape_str(images.shape()));
    require(mode_ != NetMode::Fixed || plan_.has_value(), ErrorKind::State, "fixed mode without a plan");
    std::fill(conv_calls_.begin(), conv_calls_.end(), 0);
    std::vector<Var> regs(static_cast<std::size_t>(next_register_));
    regs[0] = tape.constant(images);
    for (const auto& step : program_) {
        Var in = regs.at(static_cast<std::size_t>(step.in));
        Var out;
        switch (step.kind) {
        case LayerKind::Conv:
            out = conv_forward(tape, convs_[static_cast<std::size_t>(step.unit)], in, options);
            break;
        case LayerKind::BatchNorm: {
            auto& b = bns_[static_cast<std::size_t>(step.unit)];
            out = batchnorm(in, tape.param(b.gamma), tape.param(b.beta), b.state, options.training);
            break;
        }
        case LayerKind::Relu:
            out = relu(in);
            break;
        case LayerKind::ResidualAdd:
            out = add(in, regs.at(static_cast<std::size_t>(step.in2)));
            break;
        case LayerKind::AvgPool:
            out = global_avg_pool(in);
            break;
        case LayerKind::Dense: {
            auto& d = denses_[static_cast<std::size_t>(step.unit)];
            out = dense(in, tape.param(d.weight), tape.param(d.bias));
            break;
        }
        }
        regs.at(static_cast<std::size_t>(step.out)) = out;
    }
    return regs.at(static_cast<std::size_t>(output_register_));
}

Tensor MixedPrecNet::predict_logits(const Tensor& images)
{
    Tape tape;
    ForwardOptions opt;
    opt.training = false;
    const NetMode saved = mode_;
    // Stochastic search evaluates with plain softmax coefficients.
    if (mode_ == NetMode::SearchStochastic)
        mode_ = NetMode::SearchDeterministic;
    Tensor out;
    try {
        out = forward(tape, images, opt).value();
    } catch (...) {
        mode_ = saved;
        throw;
    }
    mode_ = saved;
    return out;
}

std::vector<Param*> MixedPrecNet::weight_params()
{
    std::vector<Param*> out;
    for (auto& c : convs_)
        out.push_back(&c.weight);
    for (auto& d : denses_) {
        out.push_back(&d.weight);
        out.push_back(&d.bias);
    }
    return out;
}

std::vector<Param*> MixedPrecNet::bn_params()
{
    std::vector<Param*> out;
    for (auto& b : bns_) {
        out.push_back(&b.gamma);
        out.push_back(&b.beta);
    }
    return out;
}

std::vector<Param*> MixedPrecNet::alpha_params()
{
    std::vector<Param*> out;
    for (auto& s : sites_)
        out.push_back(&s.alpha);
    return out;
}

std::vector<Param*> MixedPrecNet::strength_params()
{
    std::vector<Param*> out;
    for (auto& s : sites_) {
        out.push_back(&s.weight_strength);
        out.push_back(&s.activation_strength);
    }
    return out;
}

void MixedPrecNet::zero_grads()
{
    for (const auto& group : {weight_params(), bn_params(), alpha_params(), strength_params()})
        for (auto* p : group)
            p->zero_grad();
}

std::vector<LayerStrengths> MixedPrecNet::strengths() const
{
    std::vector<LayerStrengths> out;
    for (const auto& s : sites_) {
        auto r = s.weight_strength.value.data();
        auto a = s.activation_strength.value.data();
        out.push_back({{r.begin(), r.end()}, {a.begin(), a.end()}});
    }
    return out;
}

void MixedPrecNet::set_strengths(const std::vector<LayerStrengths>& strengths)
{
    require(strengths.size() == sites_.size(), ErrorKind::InvalidArgument, "strength count does not match layers");
    for (std::size_t q = 0; q < sites_.size(); ++q) {
        require(strengths[q].weight.size() == bits_.size() && strengths[q].activation.size() == bits_.size(),
                ErrorKind::InvalidArgument, "strength length does not match bitwidth set");
        sites_[q].weight_strength.value = Tensor({bits_.size()}, strengths[q].weight);
        sites_[q].activation_strength.value = Tensor({bits_.size()}, strengths[q].activation);
    }
}

std::vector<double> MixedPrecNet::alphas() const
{
    std::vector<double> out;
    for (const auto& s : sites_)
        out.push_back(s.alpha.value[0]);
    return out;
}

void MixedPrecNet::set_alphas(const std::vector<double>& alphas)
{
    require(alphas.size() == sites_.size(), ErrorKind::InvalidArgument, "alpha count does not match layers");
    for (std::size_t q = 0; q < sites_.size(); ++q) {
        require(alphas[q] > 0.0, ErrorKind::InvalidArgument, "alpha must be positive");
        sites_[q].alpha.value = Tensor({1}, alphas[q]);
    }
}

std::vector<std::pair<std::string, Tensor*>> MixedPrecNet::named_tensors()
{
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& c : convs_)
        out.emplace_back(c.weight.name, &c.weight.value);
    for (auto& b : bns_) {
        out.emplace_back(b.gamma.name, &b.gamma.value);
        out.emplace_back(b.beta.name, &b.beta.value);
        out.emplace_back(b.name + ".running_mean", &b.state.running_mean);
        out.emplace_back(b.name + ".running_var", &b.state.running_var);
    }
    for (auto& d : denses_) {
        out.emplace_back(d.weight.name, &d.weight.value);
        out.emplace_back(d.bias.name, &d.bias.value);
    }
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> MixedPrecNet::named_tensors() const
{
    auto mut = const_cast<MixedPrecNet*>(this)->named_tensors();
    return {mut.begin(), mut.end()};
}

Var forward_search(MixedPrecNet& net, Tape& tape, const Tensor& images, const ForwardOptions& options)
{
    require(net.mode() != NetMode::Fixed, ErrorKind::State, "forward_search: network is in fixed mode");
    return net.forward(tape, images, options);
}

Var forward_fixed(MixedPrecNet& net, Tape& tape, const Tensor& images, const NetworkPlan& plan,
                  const ForwardOptions& options)
{
    if (net.mode() != NetMode::Fixed || !net.plan() || *net.plan() != plan)
        net.set_fixed_plan(plan);
    return net.forward(tape, images, options);
}

EvalResult evaluate(MixedPrecNet& net, const Dataset& data, std::span<const std::size_t> indices,
                    std::size_t batch_size)
{
    EvalResult r;
    if (indices.empty())
        return r;
    std::size_t correct = 0;
    double loss = 0.0;
    for (std::size_t lo = 0; lo < indices.size(); lo += batch_size) {
        const std::size_t hi = std::min(indices.size(), lo + batch_size);
        const Batch b = make_batch(data, indices.subspan(lo, hi - lo));
        const Tensor logits = net.predict_logits(b.images);
        const std::size_t k = logits.dim(1);
        for (std::size_t i = 0; i < b.labels.size(); ++i) {
            const double* row = logits.ptr() + i * k;
            const auto pred = static_cast<std::int32_t>(std::max_element(row, row + k) - row);
            r.predictions.push_back(pred);
            correct += pred == b.labels[i];
            const double mx = *std::max_element(row, row + k);
            double sum = 0.0;
            for (std::size_t j = 0; j < k; ++j)
                sum += std::exp(row[j] - mx);
            loss += mx + std::log(sum) - row[static_cast<std::size_t>(b.labels[i])];
        }
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
    r.loss = loss / static_cast<double>(indices.size());
    return r;
}

bool is_low_bit(const NetworkPlan& plan)
{
    if (plan.layers.empty())
        return false;
    double sum = 0.0;
    for (const auto& lb : plan.layers)
        sum += std::min(lb.weight_bits, 8) + std::min(lb.act_bits, 8);
    return sum / (2.0 * static_cast<double>(plan.layers.size())) < 3.0;
}

RetrainMetrics retrain(MixedPrecNet& net, const Dataset& data, const NetworkPlan& plan, const RetrainConfig& config)
{
    net.set_fixed_plan(plan);
    net.set_bn_frozen(false);
    RetrainMetrics m;
    m.low_bit = is_low_bit(plan);
    const double wd = m.low_bit ? config.weight_decay_low : config.weight_decay_high;
    const double alpha_wd = m.low_bit ? 0.0 : config.weight_decay_high;

    std::vector<std::size_t> order = data.split(config.train_split);
    require(!order.empty(), ErrorKind::InvalidArgument, "retrain: empty training split");
    const std::size_t steps_per_epoch = (order.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total = steps_per_epoch * config.epochs;
    Rng rng(config.seed);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size, ++step) {
            const std::size_t hi = std::min(order.size(), lo + config.batch_size);
            if (hi - lo < 2)
                continue;
            Batch b = make_batch(data, std::span<const std::size_t>(order).subspan(lo, hi - lo));
            if (config.augment)
                augment_batch(b, rng);
            net.zero_grads();
            Tape tape;
            ForwardOptions opt;
            opt.training = true;
            Var loss = softmax_xent(net.forward(tape, b.images, opt), b.labels);
            tape.backward(loss);
            epoch_loss += loss.value()[0] * static_cast<double>(hi - lo);
            const double lr = cosine_lr(config.lr, step, total);
            for (auto* p : net.weight_params())
                sgd_momentum_step(*p, lr, config.momentum, wd);
            for (auto* p : net.bn_params())
                sgd_momentum_step(*p, lr, config.momentum, 0.0);
            for (auto* p : net.alpha_params()) {
                sgd_momentum_step(*p, lr, config.momentum, alpha_wd);
                project_alpha(*p);
            }
        }
        m.final_train_loss = epoch_loss / static_cast<double>(order.size());
        m.epochs_run = epoch + 1;
    }
    net.set_bn_frozen(true);
    m.train_accuracy = evaluate(net, data, data.split(config.train_split)).accuracy;
    if (data.splits.count(config.test_split))
        m.test_accuracy = evaluate(net, data, data.split(config.test_split)).accuracy;
    return m;
}

} // namespace mixbit
