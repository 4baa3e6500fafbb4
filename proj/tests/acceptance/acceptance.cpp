// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. `acceptance` runs every criterion; `acceptance --criterion N`
// runs one. Each criterion prints a single PASS/FAIL line with the measured
// values. Exit status: 0 all passed, 1 any failed, 77 skipped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bd/bdmodel.hpp"
#include "bd/bitplane.hpp"
#include "cost/costmodel.hpp"
#include "data/dataset.hpp"
#include "error.hpp"
#include "net/checkpoint.hpp"
#include "net/network.hpp"
#include "quant/quantizer.hpp"
#include "run/config.hpp"
#include "run/pipeline.hpp"
#include "search/search.hpp"

using namespace mixbit;
using Clock = std::chrono::steady_clock;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
    Verdict verdict = Verdict::Fail;
    std::string detail;
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...)
{
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

Outcome verdict(bool ok, std::string detail)
{
    return {ok ? Verdict::Pass : Verdict::Fail, std::move(detail)};
}

// ---------------------------------------------------------------------------
// 1. Decompose -> binary GEMM -> recombine against direct integer products.

std::vector<std::int64_t> direct_matmul(const CodeMatrix& a, const CodeMatrix& b)
{
    std::vector<std::int64_t> out(a.rows * b.cols, 0);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            std::int64_t acc = 0;
            for (std::size_t k = 0; k < a.cols; ++k)
                acc += std::int64_t(a.at(i, k)) * std::int64_t(b.at(k, j));
            out[i * b.cols + j] = acc;
        }
    return out;
}

CodeMatrix random_codes(std::size_t r, std::size_t c, int bits, std::mt19937_64& gen)
{
    std::uniform_int_distribution<std::uint32_t> d(0, (1u << bits) - 1);
    CodeMatrix m(r, c);
    for (auto& v : m.data)
        v = d(gen);
    return m;
}

Outcome criterion_bd_exactness()
{
    const auto t0 = Clock::now();
    std::mt19937_64 gen(20260101);
    std::uniform_int_distribution<std::size_t> dim(1, 7);
    std::size_t cases = 0, mismatches = 0;
    for (int m = 1; m <= 5; ++m)
        for (int k = 1; k <= 5; ++k)
            for (std::size_t s : {1, 63, 64, 65, 128})
                for (int trial = 0; trial < 4; ++trial) {
                    const std::size_t rows = dim(gen), cols = dim(gen);
                    // Alternate between random codes and the all-ones extreme.
                    CodeMatrix w = random_codes(rows, s, m, gen), x = random_codes(s, cols, k, gen);
                    if (trial == 3) {
                        std::fill(w.data.begin(), w.data.end(), (1u << m) - 1);
                        std::fill(x.data.begin(), x.data.end(), (1u << k) - 1);
                    }
                    const auto expect = direct_matmul(w, x);
                    const BitPlaneMatrix bw = decompose_bits(w, m), bx = decompose_bits(x.transposed(), k);
                    const IntMatrix got = recombine(binary_gemm(bw, bx), m, k);
                    const IntMatrix fused = bd_matmul(w, m, x, k);
                    ++cases;
                    if (got.rows != rows || got.cols != cols || got.data != expect || fused.data != expect)
                        ++mismatches;
                }
    const double secs = seconds_since(t0);
    return verdict(cases >= 500 && mismatches == 0 && secs < 30.0,
                   fmt("%zu cases, %zu mismatches, %.2f s (limit 30 s)", cases, mismatches, secs));
}

// ---------------------------------------------------------------------------
// 2. Exported TinyNet vs float fixed-plan evaluation.

Outcome criterion_bd_end_to_end()
{
    const auto t0 = Clock::now();
    const Dataset data = gen_synthetic(10, 30, 16, 21, 26);
    auto net = MixedPrecNet::tinynet(10, BitwidthSet(), 21);
    const NetworkPlan plan{{{2, 3}, {3, 2}, {4, 4}}};
    RetrainConfig rc;
    rc.epochs = 4;
    rc.batch_size = 64;
    retrain(net, data, plan, rc);

    std::vector<std::size_t> idx(data.split("test").begin(), data.split("test").begin() + 256);
    const Batch batch = make_batch(data, idx);
    net.set_fixed_plan(plan);
    const Tensor ref = net.predict_logits(batch.images);
    const BDModel model = export_bd_model(net);
    const Tensor got = bd_infer(model, batch.images);

    std::size_t agree = 0;
    double dev = 0.0;
    const std::size_t k = ref.dim(1);
    for (std::size_t i = 0; i < 256; ++i) {
        const double* a = ref.ptr() + i * k;
        const double* b = got.ptr() + i * k;
        agree += (std::max_element(a, a + k) - a) == (std::max_element(b, b + k) - b);
        for (std::size_t j = 0; j < k; ++j)
            dev = std::max(dev, std::abs(a[j] - b[j]));
    }
    const double secs = seconds_since(t0);
    return verdict(agree == 256 && dev < 1e-3 && secs < 60.0,
                   fmt("argmax agreement %zu/256, max logit deviation %.3e (limit 1e-3), %.1f s", agree, dev, secs));
}

// ---------------------------------------------------------------------------
// 3. ResNet-20 cost table.

Outcome criterion_flops_table()
{
    const auto t0 = Clock::now();
    const auto net = MixedPrecNet::resnet20(10, BitwidthSet(), 0);
    const auto costs = net.layer_costs();
    const double full = full_precision_flops(costs) / kMega;
    bool ok = std::abs(full - 40.81) / 40.81 <= 0.03;
    std::string detail = fmt("full %.3f M (40.81 +-3%%)", full);
    const double table[] = {17.8, 11.6, 6.71, 3.23, 1.14};
    for (int b = 5; b >= 1; --b) {
        const double ref = table[5 - b];
        const double f = network_flops(NetworkPlan::uniform(net.quantized_layer_count(), b), costs) / kMega;
        const double rel = std::abs(f - ref) / ref;
        ok = ok && rel <= 0.15;
        detail += fmt("; %d-bit %.3f M vs %.3g (%.1f%%)", b, f, ref, 100.0 * rel);
    }
    const double secs = seconds_since(t0);
    return verdict(ok && secs < 5.0, detail + fmt("; %.2f s", secs));
}

// ---------------------------------------------------------------------------
// 4. One convolution per layer regardless of |B|; DNAS reference scales.

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

double time_search_steps(const BitwidthSet& bits, const Batch& train, const Batch& valid)
{
    auto net = MixedPrecNet::tinynet(10, bits, 4);
    net.set_search_mode(false);
    SearchStepParams sp;
    search_step(net, train, valid, sp);
    std::vector<double> t;
    for (int i = 0; i < 7; ++i) {
        const auto t0 = Clock::now();
        search_step(net, train, valid, sp);
        t.push_back(seconds_since(t0));
    }
    return median(t);
}

Outcome criterion_o1_search()
{
    const auto t0 = Clock::now();
    Rng rng(4);
    const Tensor x = uniform({4, 3, 16, 16}, 0.0, 1.0, rng);
    bool counters_ok = true;
    for (const auto& b : {std::vector<int>{3}, std::vector<int>{1, 2, 3}, std::vector<int>{1, 2, 3, 4, 5}}) {
        auto net = MixedPrecNet::tinynet(10, BitwidthSet(b), 5);
        for (bool sto : {false, true}) {
            net.set_search_mode(sto);
            Tape tape;
            Rng noise(6);
            ForwardOptions fo;
            fo.training = true;
            fo.rng = &noise;
            net.forward(tape, x, fo);
            for (std::size_t q = 0; q < net.quantized_layer_count(); ++q)
                counters_ok = counters_ok && net.conv_calls()[q] == 1 && net.meta_weight_tensors(q) == 1;
        }
    }

    // Reference layer: DNAS keeps one weight per branch and convolves each.
    const BitwidthSet five;
    const Tensor w = randn({8, 3, 3, 3}, 0.5, rng);
    const std::vector<Tensor> branches(five.size(), w);
    const std::vector<double> r = {0.3, -0.2, 0.9, 0.1, -0.5};
    std::size_t dnas_calls = 0, ebs_calls = 0;
    const Tensor yd = dnas_reference_forward(x, branches, r, five, 1, 1, dnas_calls);
    const Tensor ye = ebs_reference_forward(x, w, r, five, 1, 1, ebs_calls);
    double gap = 0.0;
    for (std::size_t i = 0; i < yd.size(); ++i)
        gap = std::max(gap, std::abs(yd[i] - ye[i]));

    const Dataset data = gen_synthetic(10, 13, 16, 9);
    auto [ti, vi] = search_split(data, "train", 1);
    ti.resize(64);
    vi.resize(64);
    const Batch train = make_batch(data, ti), valid = make_batch(data, vi);
    const double t1 = time_search_steps(BitwidthSet(std::vector<int>{1}), train, valid);
    const double t5 = time_search_steps(BitwidthSet(), train, valid);
    const double ratio = t5 / t1;
    const double secs = seconds_since(t0);
    return verdict(counters_ok && dnas_calls == 5 && ebs_calls == 1 && gap < 1e-9 && ratio < 1.5 && secs < 120.0,
                   fmt("EBS counters %s; DNAS reference %zu convs vs EBS %zu (outputs differ by %.1e); "
                       "step time |B|=5 / |B|=1 = %.3f / %.3f ms = %.2fx (limit 1.5x); %.1f s",
                       counters_ok ? "1 conv and 1 meta weight per layer" : "WRONG", dnas_calls, ebs_calls, gap,
                       t5 * 1e3, t1 * 1e3, ratio, secs));
}

// ---------------------------------------------------------------------------
// 5. Analytic gradients against central differences.

Outcome criterion_gradients()
{
    const auto t0 = Clock::now();
    const auto det = gradient_check(5, false, 100);
    const auto sto = gradient_check(5, true, 100);
    const double worst_rs = std::max({det.r_error, det.s_error, sto.r_error, sto.s_error});
    const double worst_alpha = std::max(det.alpha_error, sto.alpha_error);
    const double secs = seconds_since(t0);
    return verdict(worst_rs < 1e-4 && worst_alpha < 1e-4 && secs < 60.0,
                   fmt("det r %.2e s %.2e alpha %.2e; sto r %.2e s %.2e alpha %.2e "
                       "(%zu/%zu/%zu coords, limit 1e-4); %.1f s",
                       det.r_error, det.s_error, det.alpha_error, sto.r_error, sto.s_error, sto.alpha_error,
                       det.r_coords, det.s_coords, det.alpha_coords, secs));
}

// ---------------------------------------------------------------------------
// 6. Expected FLOPs: independent oracle, one-hot consistency, gradient.

std::vector<double> oracle_softmax(const std::vector<double>& v)
{
    const double mx = *std::max_element(v.begin(), v.end());
    std::vector<double> e(v.size());
    double z = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        z += e[i] = std::exp(v[i] - mx);
    for (auto& x : e)
        x /= z;
    return e;
}

double oracle_layer(double macs, const LayerStrengths& s, const BitwidthSet& bits)
{
    const auto cw = oracle_softmax(s.weight), cx = oracle_softmax(s.activation);
    double bw = 0.0, bx = 0.0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        bw += cw[i] * bits[i];
        bx += cx[i] * bits[i];
    }
    return macs * bw * bx / 64.0;
}

std::vector<double> quantized_macs(const std::vector<LayerCost>& costs)
{
    std::vector<double> out;
    for (const auto& c : costs)
        if (c.quantized)
            out.push_back(c.macs);
    return out;
}

double oracle_expected(const std::vector<LayerCost>& costs, const std::vector<LayerStrengths>& s,
                       const BitwidthSet& bits)
{
    double total = 0.0;
    std::size_t q = 0;
    for (const auto& c : costs)
        total += c.quantized ? oracle_layer(c.macs, s[q++], bits) : c.macs;
    return total;
}

Outcome criterion_expected_flops()
{
    const auto t0 = Clock::now();
    const BitwidthSet bits;
    Rng rng(66);
    std::uniform_int_distribution<int> pick(0, 4);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst_onehot = 0.0, worst_grad = 0.0, worst_oracle = 0.0;
    for (const auto& net : {MixedPrecNet::tinynet(10, bits, 0), MixedPrecNet::resnet20(10, bits, 0)}) {
        const auto costs = net.layer_costs();
        const std::size_t nq = net.quantized_layer_count();
        for (int trial = 0; trial < 5; ++trial) {
            NetworkPlan plan;
            std::vector<LayerStrengths> hot(nq), soft(nq);
            for (std::size_t q = 0; q < nq; ++q) {
                const int a = pick(rng), b = pick(rng);
                plan.layers.push_back({bits[std::size_t(a)], bits[std::size_t(b)]});
                hot[q].weight.assign(5, -1e3);
                hot[q].activation.assign(5, -1e3);
                hot[q].weight[std::size_t(a)] = 1e3;
                hot[q].activation[std::size_t(b)] = 1e3;
                for (int i = 0; i < 5; ++i) {
                    soft[q].weight.push_back(g(rng));
                    soft[q].activation.push_back(g(rng));
                }
            }
            const double f = network_flops(plan, costs);
            worst_onehot = std::max(worst_onehot, std::abs(expected_flops(costs, hot, bits).flops - f) / f);

            const auto base = expected_flops(costs, soft, bits);
            const double o = oracle_expected(costs, soft, bits);
            worst_oracle = std::max(worst_oracle, std::abs(base.flops - o) / o);
            // Only layer q depends on its own strengths, so differencing that
            // layer's term avoids cancelling against the whole-network sum.
            const auto macs = quantized_macs(costs);
            const double h = 1e-4;
            for (std::size_t q = 0; q < nq; ++q)
                for (int side = 0; side < 2; ++side)
                    for (std::size_t i = 0; i < 5; ++i) {
                        LayerStrengths up = soft[q], down = soft[q];
                        (side ? up.activation : up.weight)[i] += h;
                        (side ? down.activation : down.weight)[i] -= h;
                        const double fd =
                            (oracle_layer(macs[q], up, bits) - oracle_layer(macs[q], down, bits)) / (2 * h);
                        const double an = (side ? base.grad[q].activation : base.grad[q].weight)[i];
                        worst_grad = std::max(worst_grad, std::abs(an - fd) / std::max(std::abs(fd), 1.0));
                    }
        }
    }
    const double secs = seconds_since(t0);
    return verdict(worst_onehot <= 1e-9 && worst_grad <= 1e-6 && worst_oracle <= 1e-12 && secs < 1.0,
                   fmt("one-hot rel err %.2e (limit 1e-9); gradient rel err %.2e (limit 1e-6); "
                       "oracle rel err %.2e; %.2f s",
                       worst_onehot, worst_grad, worst_oracle, secs));
}

// ---------------------------------------------------------------------------
// 7. Search effectiveness on synthetic data.

Outcome criterion_search_effectiveness()
{
    const auto t0 = Clock::now();
    RunConfig cfg = parse_config_text(R"({
        "dataset": {"kind": "synthetic", "classes": 10, "per_class": 100, "test_per_class": 20, "hw": 16, "seed": 1},
        "arch": "tinynet", "bits": [1, 2, 3, 4, 5], "mode": "det", "lambda": 0.06,
        "target_fraction": 0.3, "seed": 7,
        "search": {"epochs": 40, "batch_size": 64},
        "retrain": {"epochs": 30, "batch_size": 64}})");
    const Dataset data = load_dataset(cfg.dataset);

    auto searched = build_net(cfg, data.num_classes, data.height);
    const auto stage = search_stage(searched, data, cfg, std::nullopt);
    const double target = stage.target_mflops;

    double min_max_coeff = 1.0;
    for (const auto& ls : stage.search.best_strengths)
        for (const auto* v : {&ls.weight, &ls.activation}) {
            const auto c = oracle_softmax(*v);
            min_max_coeff = std::min(min_max_coeff, *std::max_element(c.begin(), c.end()));
        }

    const RetrainConfig rc = effective_retrain_config(cfg);
    auto fresh = build_net(cfg, data.num_classes, data.height);
    const auto costs = fresh.layer_costs();
    const double plan_mflops = network_flops(stage.search.plan, costs) / kMega;
    const double searched_acc = retrain(fresh, data, stage.search.plan, rc).test_accuracy;

    Rng rng(cfg.seed + 1000);
    double random_sum = 0.0;
    std::string randoms;
    for (int i = 0; i < 5; ++i) {
        const NetworkPlan p = sample_random_plan(fresh.bits(), costs, 0.8 * target * kMega, 1.2 * target * kMega, rng);
        auto net = build_net(cfg, data.num_classes, data.height);
        const double acc = retrain(net, data, p, rc).test_accuracy;
        random_sum += acc;
        randoms += fmt("%s%.3f", i ? "," : "", acc);
    }
    const double random_mean = random_sum / 5.0;

    std::ostringstream plan_str;
    for (const auto& l : stage.search.plan.layers)
        plan_str << l.weight_bits << "/" << l.act_bits << " ";
    const bool a = plan_mflops <= 1.2 * target;
    const bool b = searched_acc >= random_mean;
    const bool c = min_max_coeff >= 0.5;
    const double secs = seconds_since(t0);
    return verdict(a && b && c && secs < 900.0,
                   fmt("(a) %s plan %s= %.4f MFLOPs vs 1.2 x target %.4f; (b) %s searched acc %.3f vs random mean "
                       "%.3f [%s]; (c) %s min per-layer max coefficient %.3f at best epoch %zu; %.0f s",
                       a ? "ok" : "MISS", plan_str.str().c_str(), plan_mflops, 1.2 * target, b ? "ok" : "MISS",
                       searched_acc, random_mean, randoms.c_str(), c ? "ok" : "MISS", min_max_coeff,
                       stage.search.best_epoch, secs));
}

// ---------------------------------------------------------------------------
// 8. Kernel scaling for (1,2) vs (1,1).

Outcome criterion_kernel_scaling()
{
    const auto t0 = Clock::now();
    const KernelBench a = bench_kernel(64, 64, 3, 16, 1, 1, 51, 8);
    const KernelBench b = bench_kernel(64, 64, 3, 16, 1, 2, 51, 8);
    const double ops = double(b.and_word_ops) / double(a.and_word_ops);
    const double wall = b.median_ns / a.median_ns;
    const double secs = seconds_since(t0);
    return verdict(b.and_word_ops == 2 * a.and_word_ops && wall >= 1.6 && wall <= 2.6 && secs < 120.0,
                   fmt("AND word-ops %llu vs %llu (ratio %.3f); median %.1f vs %.1f us (ratio %.2f, band "
                       "[1.6, 2.6]); %.1f s",
                       static_cast<unsigned long long>(b.and_word_ops), static_cast<unsigned long long>(a.and_word_ops),
                       ops, b.median_ns / 1e3, a.median_ns / 1e3, wall, secs));
}

// ---------------------------------------------------------------------------
// 9. Quantizer conformance.

bool on_grid(double v, double levels)
{
    const double s = v * levels;
    return std::abs(s - std::round(s)) <= 1e-9 * std::max(1.0, levels);
}

Outcome criterion_quantizer()
{
    const auto t0 = Clock::now();
    constexpr std::size_t n = 100000;
    Rng rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t violations = 0, checked = 0;
    for (int b = 1; b <= 16; ++b) {
        const double levels = grid_levels(b);

        // Normalized grid on [0, 1].
        std::vector<double> xs(n);
        for (auto& x : xs)
            x = unit(rng);
        xs[0] = 0.0;
        xs[1] = 1.0;
        std::sort(xs.begin(), xs.end());
        double prev = -1.0;
        for (double x : xs) {
            const double q = quantize_grid(x, b);
            violations += q < 0.0 || q > 1.0 || !on_grid(q, levels) || quantize_grid(q, b) != q || q < prev
                          || std::abs(q - x) > 0.5 / levels + 1e-12;
            prev = q;
        }

        // Activations with a clip value, including out-of-range inputs.
        const double alpha = 0.5 + 2.0 * unit(rng);
        Tensor x({n});
        for (std::size_t i = 0; i < n; ++i)
            x[i] = -0.5 * alpha + 2.0 * alpha * double(i) / double(n - 1);
        const Tensor qa = quantize_activations(x, alpha, b);
        const Tensor qa2 = quantize_activations(qa, alpha, b);
        for (std::size_t i = 0; i < n; ++i)
            violations += qa[i] < 0.0 || qa[i] > alpha || !on_grid(qa[i] / alpha, levels) || qa2[i] != qa[i]
                          || (i > 0 && qa[i] < qa[i - 1]);

        // Weights land on the signed grid in [-1, 1] and keep their order.
        Tensor w({n});
        for (std::size_t i = 0; i < n; ++i)
            w[i] = -3.0 + 6.0 * double(i) / double(n - 1);
        const Tensor qw = quantize_weights(w, b);
        for (std::size_t i = 0; i < n; ++i)
            violations += qw[i] < -1.0 || qw[i] > 1.0 || !on_grid((qw[i] + 1.0) / 2.0, levels)
                          || (i > 0 && qw[i] < qw[i - 1]);
        checked += 3 * n;
    }
    const double secs = seconds_since(t0);
    return verdict(violations == 0 && secs < 10.0,
                   fmt("%zu points over bitwidths 1..16, %zu violations; %.2f s", checked, violations, secs));
}

// ---------------------------------------------------------------------------
// 10. CIFAR-10 subset pipeline (needs MIXBIT_CIFAR_DIR).

std::size_t env_size(const char* name, std::size_t fallback)
{
    const char* v = std::getenv(name);
    return v && *v ? std::size_t(std::strtoull(v, nullptr, 10)) : fallback;
}

Outcome criterion_cifar()
{
    const char* dir = std::getenv("MIXBIT_CIFAR_DIR");
    if (!dir || !*dir)
        return {Verdict::Skip, "MIXBIT_CIFAR_DIR is not set"};
    const auto t0 = Clock::now();
    RunConfig cfg = parse_config_text(R"({"arch": "resnet20", "target_fraction": 0.3, "seed": 3,
        "dataset": {"kind": "cifar10", "subset": 5000, "normalize": true, "seed": 3}})");
    set_config_value(cfg, "dataset.dir", dir);
    set_config_value(cfg, "search.epochs", std::to_string(env_size("MIXBIT_CIFAR_SEARCH_EPOCHS", 1)));
    set_config_value(cfg, "retrain.epochs", std::to_string(env_size("MIXBIT_CIFAR_RETRAIN_EPOCHS", 1)));
    const Dataset data = load_dataset(cfg.dataset);

    auto net = build_net(cfg, data.num_classes, data.height);
    const std::filesystem::path work = std::filesystem::current_path() / "acceptance_cifar";
    const auto stage = search_stage(net, data, cfg, work);
    const auto ckpt = load_checkpoint(work / "search.json");
    const NetworkPlan plan = select_plan(ckpt.strengths(), ckpt.bits());

    auto student = build_net(cfg, data.num_classes, data.height);
    copy_weights(ckpt, student);
    const auto rm = retrain(student, data, plan, effective_retrain_config(cfg));
    write_bd_model(export_bd_model(student), work / "model.mbbd");
    const BDModel model = read_bd_model(work / "model.mbbd");

    const auto& test = data.split("test");
    const auto float_pred = evaluate(student, data, test).predictions;
    const auto bd_pred = argmax_rows(bd_infer_split(model, data, "test"));
    std::size_t agree = 0;
    for (std::size_t i = 0; i < test.size(); ++i)
        agree += float_pred[i] == bd_pred[i];
    const double secs = seconds_since(t0);
    return verdict(agree == test.size() && plan == stage.search.plan,
                   fmt("%zu train images; BD/eval agreement %zu/%zu; test acc %.3f (not asserted); %.0f s",
                       data.split("train").size(), agree, test.size(), rm.test_accuracy, secs));
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv)
{
    const std::vector<Criterion> all = {
        {1, "BD exactness", criterion_bd_exactness},
        {2, "BD end-to-end", criterion_bd_end_to_end},
        {3, "FLOPs table", criterion_flops_table},
        {4, "O(1) search", criterion_o1_search},
        {5, "gradient correctness", criterion_gradients},
        {6, "expected-FLOPs consistency", criterion_expected_flops},
        {7, "search effectiveness", criterion_search_effectiveness},
        {8, "kernel scaling", criterion_kernel_scaling},
        {9, "quantizer conformance", criterion_quantizer},
        {10, "CIFAR-10 pipeline", criterion_cifar},
    };

    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
            return 2;
        }
    }
    if (only < 0 || only > int(all.size())) {
        std::fprintf(stderr, "no criterion %d\n", only);
        return 2;
    }

    bool failed = false, ran = false;
    for (const auto& c : all) {
        if (only && c.id != only)
            continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {Verdict::Fail, std::string("error: ") + e.what()};
        }
        const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
        std::printf("criterion %2d %-28s %s  %s\n", c.id, c.name, tag, o.detail.c_str());
        std::fflush(stdout);
        failed = failed || o.verdict == Verdict::Fail;
        ran = ran || o.verdict != Verdict::Skip;
    }
    if (failed)
        return 1;
    return ran ? 0 : 77;
}
