// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "search/search.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "numerics/optim.hpp"
#include "quant/quantizer.hpp"

namespace mixbit {

namespace {

void weight_update(MixedPrecNet& net, double lr, double momentum, double wd)
{
    for (auto* p : net.weight_params())
        sgd_momentum_step(*p, lr, momentum, wd);
    for (auto* p : net.bn_params())
        sgd_momentum_step(*p, lr, momentum, 0.0);
    for (auto* p : net.alpha_params()) {
        sgd_momentum_step(*p, lr, momentum, wd);
        project_alpha(*p);
    }
}

double train_pass(MixedPrecNet& net, const Batch& batch, const SearchStepParams& params)
{
    net.zero_grads();
    Tape tape;
    ForwardOptions opt;
    opt.training = true;
    opt.tau = params.tau;
    opt.rng = params.rng;
    Var loss = softmax_xent(net.forward(tape, batch.images, opt), batch.labels);
    tape.backward(loss);
    return loss.value()[0];
}

} // namespace

SearchStepResult search_step(MixedPrecNet& net, const Batch& train, const Batch& valid, const SearchStepParams& params)
{
    require(net.mode() != NetMode::Fixed, ErrorKind::State, "search_step: network is in fixed mode");
    require(!train.labels.empty() && !valid.labels.empty(), ErrorKind::InvalidArgument, "search_step: empty batch");
    SearchStepResult r;

    r.train_loss = train_pass(net, train, params);
    weight_update(net, params.weight_lr, params.momentum, params.weight_decay);

    r.valid_loss = train_pass(net, valid, params);
    const auto costs = net.layer_costs();
    const auto strengths = net.strengths();
    const auto expected = expected_flops(costs, strengths, net.bits());
    r.expected_mflops = expected.flops / kMega;
    const double slope = flops_penalty_slope(r.expected_mflops, params.target_mflops, params.lambda) / kMega;
    auto sp = net.strength_params();
    for (std::size_t q = 0; q < strengths.size(); ++q) {
        Param& rw = *sp[2 * q];
        Param& sx = *sp[2 * q + 1];
        for (std::size_t i = 0; i < net.bits().size(); ++i) {
            rw.grad[i] += slope * expected.grad[q].weight[i];
            sx.grad[i] += slope * expected.grad[q].activation[i];
        }
    }
    for (auto* p : sp)
        adam_step(*p, params.strength_lr);
    return r;
}

double tau_at_epoch(const SearchConfig& config, std::size_t epoch)
{
    if (config.epochs <= 1)
        return config.tau_start;
    const double t = static_cast<double>(epoch) / static_cast<double>(config.epochs - 1);
    return config.tau_start + (config.tau_end - config.tau_start) * t;
}

SearchResult run_search(MixedPrecNet& net, const Dataset& data, const SearchConfig& config)
{
    require(config.batch_size >= 2, ErrorKind::Config, "search batch size must be at least 2");
    require(config.lambda >= 0.0, ErrorKind::Config, "lambda must be non-negative");
    require(config.tau_start > 0.0 && config.tau_end > 0.0, ErrorKind::Config, "tau must stay positive");
    net.set_search_mode(config.stochastic);
    auto [train_idx, valid_idx] = search_split(data, config.split, config.seed);
    require(train_idx.size() >= 2 && valid_idx.size() >= 2, ErrorKind::InvalidArgument,
            "search needs at least 4 samples in split '" + config.split + "'");

    SearchResult result;
    result.best_strengths = net.strengths();
    Rng rng(config.seed ^ 0xa5a5a5a5ULL);
    const std::size_t steps_per_epoch = train_idx.size() / config.batch_size
                                        + (train_idx.size() % config.batch_size >= 2 ? 1 : 0);
    const std::size_t total = steps_per_epoch * (config.epochs + config.warmup_epochs);
    std::size_t step = 0;

    auto batches = [&](std::vector<std::size_t>& idx) {
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<std::span<const std::size_t>> out;
        for (std::size_t lo = 0; lo < idx.size(); lo += config.batch_size) {
            const std::size_t n = std::min(config.batch_size, idx.size() - lo);
            if (n >= 2)
                out.push_back(std::span<const std::size_t>(idx).subspan(lo, n));
        }
        return out;
    };

    for (std::size_t e = 0; e < config.warmup_epochs; ++e) {
        SearchStepParams p;
        p.tau = config.tau_start;
        p.rng = &rng;
        for (auto b : batches(train_idx)) {
            train_pass(net, make_batch(data, b), p);
            weight_update(net, cosine_lr(config.weight_lr, step++, total), config.momentum, config.weight_decay);
        }
    }

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        SearchStepParams p;
        p.momentum = config.momentum;
        p.weight_decay = config.weight_decay;
        p.strength_lr = config.strength_lr;
        p.lambda = config.lambda;
        p.target_mflops = config.target_mflops;
        p.tau = tau_at_epoch(config, epoch);
        p.rng = &rng;
        const auto tb = batches(train_idx);
        const auto vb = batches(valid_idx);
        HistoryRow row;
        row.epoch = epoch + 1;
        row.tau = config.stochastic ? p.tau : 0.0;
        std::size_t seen = 0;
        for (std::size_t k = 0; k < tb.size(); ++k) {
            p.weight_lr = cosine_lr(config.weight_lr, step++, total);
            SearchStepResult s;
            try {
                s = search_step(net, make_batch(data, tb[k]), make_batch(data, vb[k % vb.size()]), p);
            } catch (const Error& err) {
                fail(err.kind(), "search epoch " + std::to_string(epoch + 1) + " step " + std::to_string(k + 1) + ": "
                                     + err.what());
            }
            row.train_loss += s.train_loss * static_cast<double>(tb[k].size());
            row.valid_loss += s.valid_loss * static_cast<double>(tb[k].size());
            seen += tb[k].size();
        }
        row.train_loss /= static_cast<double>(seen);
        row.valid_loss /= static_cast<double>(seen);
        row.expected_mflops = expected_flops(net.layer_costs(), net.strengths(), net.bits()).flops / kMega;
        row.valid_acc = evaluate(net, data, valid_idx).accuracy;
        if (result.best_epoch == 0 || row.valid_acc > result.best_valid_acc) {
            result.best_epoch = epoch + 1;
            result.best_valid_acc = row.valid_acc;
            result.best_strengths = net.strengths();
        }
        result.history.push_back(row);
    }
    result.plan = select_plan(result.best_strengths, net.bits());
    return result;
}

NetworkPlan sample_random_plan(const BitwidthSet& bits, std::span<const LayerCost> costs, double lo, double hi,
                               Rng& rng)
{
    require(lo <= hi, ErrorKind::InvalidArgument, "random plan range has lo > hi");
    const auto layers = static_cast<std::size_t>(std::count_if(costs.begin(), costs.end(),
                                                               [](const LayerCost& c) { return c.quantized; }));
    std::uniform_int_distribution<std::size_t> pick(0, bits.size() - 1);
    NetworkPlan plan;
    plan.layers.resize(layers);
    for (std::size_t draw = 0; draw < kRandomPlanMaxDraws; ++draw) {
        for (auto& lb : plan.layers) {
            lb.weight_bits = bits[pick(rng)];
            lb.act_bits = bits[pick(rng)];
        }
        const double f = network_flops(plan, costs);
        // Relative slack so a range pinned to an exact plan cost still accepts it.
        const double slack = 1e-12 * std::max(1.0, std::abs(hi));
        if (f >= lo - slack && f <= hi + slack)
            return plan;
    }
    fail(ErrorKind::Infeasible, "no random plan with FLOPs in [" + std::to_string(lo) + ", " + std::to_string(hi)
                                    + "] after " + std::to_string(kRandomPlanMaxDraws) + " draws");
}

Tensor dnas_reference_forward(const Tensor& input, std::span<const Tensor> branch_weights,
                              std::span<const double> weight_strengths, const BitwidthSet& bits, std::size_t stride,
                              std::size_t pad, std::size_t& conv_calls)
{
    require(branch_weights.size() == bits.size() && weight_strengths.size() == bits.size(), ErrorKind::InvalidArgument,
            "dnas reference needs one weight tensor and one strength per bitwidth");
    const auto c = softmax_coeffs(weight_strengths);
    Tensor out;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        const Tensor o = conv2d_forward(input, quantize_weights(branch_weights[i], bits[i]), stride, pad);
        ++conv_calls;
        if (out.empty())
            out = Tensor::zeros_like(o);
        for (std::size_t k = 0; k < o.size(); ++k)
            out[k] += c[i] * o[k];
    }
    return out;
}

Tensor ebs_reference_forward(const Tensor& input, const Tensor& weight, std::span<const double> weight_strengths,
                             const BitwidthSet& bits, std::size_t stride, std::size_t pad, std::size_t& conv_calls)
{
    std::vector<Tensor> branches;
    for (int b : bits.bits())
        branches.push_back(quantize_weights(weight, b));
    const Tensor w = aggregate_quantized(branches, softmax_coeffs(weight_strengths));
    ++conv_calls;
    return conv2d_forward(input, w, stride, pad);
}

} // namespace mixbit
