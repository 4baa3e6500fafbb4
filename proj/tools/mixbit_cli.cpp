// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver for the mixbit library. Every stage goes through the
// C API in mixbit/mixbit.h.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mixbit/mixbit.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Thrown to unwind out of a subcommand with a status already recorded.
struct Failure {
    mb_status status;
    std::string context;
};

void check(mb_status st, const std::string& context)
{
    if (st != MB_OK)
        throw Failure{st, context};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using ConfigPtr = std::unique_ptr<mb_config, Deleter<mb_config, mb_config_free>>;
using DatasetPtr = std::unique_ptr<mb_dataset, Deleter<mb_dataset, mb_dataset_free>>;
using NetPtr = std::unique_ptr<mb_net, Deleter<mb_net, mb_net_free>>;
using PlanPtr = std::unique_ptr<mb_plan, Deleter<mb_plan, mb_plan_free>>;
using BDPtr = std::unique_ptr<mb_bd_model, Deleter<mb_bd_model, mb_bd_free>>;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("-c,--config", c.config_path, "run configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "override a config key, e.g. --set search.epochs=5");
    cmd->add_option("-o,--out", c.out_dir, "output directory (defaults to out_dir from the config)");
}

ConfigPtr load_config(const Common& c)
{
    if (c.config_path.empty()) {
        throw Failure{MB_ERR_CONFIG, "--config is required for this command"};
    }
    mb_config* raw = nullptr;
    check(mb_config_load(c.config_path.c_str(), &raw), "loading " + c.config_path);
    ConfigPtr cfg(raw);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Failure{MB_ERR_CONFIG, "--set expects key=value, got '" + kv + "'"};
        const std::string key = kv.substr(0, eq);
        check(mb_config_set(cfg.get(), key.c_str(), kv.substr(eq + 1).c_str()), "--set " + key);
    }
    return cfg;
}

fs::path out_dir_for(const Common& c, const mb_config* cfg)
{
    fs::path dir = !c.out_dir.empty() ? fs::path(c.out_dir) : fs::path(cfg ? mb_config_out_dir(cfg) : "run");
    fs::create_directories(dir);
    return dir;
}

DatasetPtr load_data(const mb_config* cfg)
{
    mb_dataset* raw = nullptr;
    check(mb_dataset_from_config(cfg, &raw), "loading dataset");
    return DatasetPtr(raw);
}

NetPtr load_net(const std::string& path)
{
    mb_net* raw = nullptr;
    check(mb_net_load(path.c_str(), &raw), "loading checkpoint " + path);
    return NetPtr(raw);
}

PlanPtr parse_plan(const std::string& spec, const mb_net* net)
{
    mb_plan* raw = nullptr;
    check(mb_plan_parse(spec.c_str(), mb_net_quantized_layers(net), &raw), "parsing plan " + spec);
    return PlanPtr(raw);
}

std::string plan_string(const mb_plan* plan)
{
    std::string s;
    for (size_t i = 0; i < mb_plan_layers(plan); ++i) {
        int w = 0;
        int x = 0;
        check(mb_plan_get(plan, i, &w, &x), "reading plan");
        if (!s.empty())
            s += ' ';
        s += std::to_string(w) + "/" + std::to_string(x);
    }
    return s;
}

std::vector<int32_t> labels_of(const mb_dataset* data, const std::string& split)
{
    std::vector<int32_t> labels(mb_dataset_count(data, split.c_str()));
    check(mb_dataset_labels(data, split.c_str(), labels.data(), labels.size()), "reading labels");
    return labels;
}

void write_manifest(const mb_config* cfg, const std::string& command, const fs::path& dir)
{
    check(mb_write_manifest(cfg, command.c_str(), (dir / "manifest.json").c_str()), "writing manifest");
}

int exit_code_for(mb_status st)
{
    return (st == MB_ERR_CONFIG || st == MB_ERR_INVALID_ARGUMENT) ? kExitConfig : kExitRuntime;
}

} // namespace

int main(int argc, char** argv)
{
    if (const char* env = std::getenv("MIXBIT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0)
            mb_set_threads(n);
    }

    CLI::App app{"mixbit: mixed-precision bitwidth search and binary-decomposition inference"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mb_version()));

    // search
    Common search_opts;
    auto* search = app.add_subcommand("search", "run the bitwidth search and write history/plan reports");
    add_common(search, search_opts);

    // select
    Common select_opts;
    std::string select_ckpt;
    auto* select = app.add_subcommand("select", "derive plan.json from a search checkpoint");
    add_common(select, select_opts);
    select->add_option("--checkpoint", select_ckpt, "search checkpoint (default <out>/search.json)");

    // retrain
    Common retrain_opts;
    std::string retrain_plan;
    std::string retrain_init;
    auto* retrain = app.add_subcommand("retrain", "train a fixed-precision network for a plan");
    add_common(retrain, retrain_opts);
    retrain->add_option("--plan", retrain_plan, "uniform:N or a plan.json path")->required();
    retrain->add_option("--init", retrain_init, "checkpoint to copy initial weights from");

    // eval
    Common eval_opts;
    std::string eval_ckpt;
    std::string eval_split = "test";
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint in float arithmetic");
    add_common(eval, eval_opts);
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint (default <out>/retrained.json)");
    eval->add_option("--split", eval_split, "dataset split");

    // export-bd
    Common export_opts;
    std::string export_ckpt;
    std::string export_path;
    auto* export_bd = app.add_subcommand("export-bd", "export a retrained checkpoint to the bit-plane format");
    add_common(export_bd, export_opts);
    export_bd->add_option("--checkpoint", export_ckpt, "checkpoint (default <out>/retrained.json)");
    export_bd->add_option("--model", export_path, "output model file (default <out>/model.mbbd)");

    // infer-bd
    Common infer_opts;
    std::string infer_model;
    std::string infer_split = "test";
    auto* infer_bd = app.add_subcommand("infer-bd", "run AND+popcount inference on a dataset split");
    add_common(infer_bd, infer_opts);
    infer_bd->add_option("--model", infer_model, "model file (default <out>/model.mbbd)");
    infer_bd->add_option("--split", infer_split, "dataset split");

    // flops
    std::string flops_arch = "resnet20";
    std::string flops_plan;
    std::string flops_out = ".";
    std::string flops_ckpt;
    int flops_classes = 10;
    auto* flops = app.add_subcommand("flops", "report the cost model for an architecture and plan");
    flops->add_option("--arch", flops_arch, "tinynet or resnet20");
    flops->add_option("--classes", flops_classes, "number of classes")->check(CLI::PositiveNumber);
    flops->add_option("--checkpoint", flops_ckpt, "take the architecture from a checkpoint instead");
    flops->add_option("--plan", flops_plan, "uniform:N or a plan.json path (omit for full precision)");
    flops->add_option("-o,--out", flops_out, "directory for cost.csv");

    // random-plan
    Common random_opts;
    double random_lo = 0.0;
    double random_hi = 0.0;
    uint64_t random_seed = 0;
    std::string random_path;
    auto* random_plan = app.add_subcommand("random-plan", "sample a plan whose FLOPs fall in [lo, hi] MFLOPs");
    add_common(random_plan, random_opts);
    random_plan->add_option("--lo", random_lo, "lower bound, MFLOPs")->required();
    random_plan->add_option("--hi", random_hi, "upper bound, MFLOPs")->required();
    random_plan->add_option("--seed", random_seed, "sampler seed");
    random_plan->add_option("--plan-out", random_path, "output path (default <out>/random_plan.json)");

    // bench
    size_t bench_cin = 64;
    size_t bench_cout = 64;
    size_t bench_kernel = 3;
    size_t bench_hw = 16;
    int bench_w = 1;
    int bench_x = 1;
    size_t bench_reps = 30;
    auto* bench = app.add_subcommand("bench", "time the binary GEMM + recombination kernel");
    bench->add_option("--cin", bench_cin, "input channels");
    bench->add_option("--cout", bench_cout, "output channels");
    bench->add_option("--kernel", bench_kernel, "kernel size");
    bench->add_option("--hw", bench_hw, "output height and width");
    bench->add_option("--wbits", bench_w, "weight bits")->check(CLI::Range(1, 16));
    bench->add_option("--xbits", bench_x, "activation bits")->check(CLI::Range(1, 16));
    bench->add_option("--reps", bench_reps, "timed repetitions");

    // gradcheck
    uint64_t grad_seed = 0;
    bool grad_sto = false;
    size_t grad_coords = 100;
    auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
    gradcheck->add_option("--seed", grad_seed, "sampling seed");
    gradcheck->add_flag("--stochastic", grad_sto, "use the Gumbel-softmax relaxation with frozen noise");
    gradcheck->add_option("--coords", grad_coords, "sampled coordinates per parameter group");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (search->parsed()) {
            auto cfg = load_config(search_opts);
            const fs::path dir = out_dir_for(search_opts, cfg.get());
            auto data = load_data(cfg.get());
            mb_net* raw = nullptr;
            check(mb_net_from_config(cfg.get(), data.get(), &raw), "building network");
            NetPtr net(raw);
            mb_plan* plan_raw = nullptr;
            mb_search_summary summary{};
            check(mb_search(net.get(), data.get(), cfg.get(), dir.c_str(), &plan_raw, &summary), "search");
            PlanPtr plan(plan_raw);
            std::printf("search: %zu epochs, best epoch %zu (valid acc %.4f)\n", summary.epochs_run,
                        summary.best_epoch, summary.best_valid_acc);
            std::printf("plan: %s\n", plan_string(plan.get()).c_str());
            std::printf("target %.6g MFLOPs, plan %.6g MFLOPs\n", summary.target_mflops, summary.plan_mflops);
            std::printf("wrote %s\n", dir.c_str());
        } else if (select->parsed()) {
            const fs::path dir = out_dir_for(select_opts, nullptr);
            const std::string ckpt = select_ckpt.empty() ? (dir / "search.json").string() : select_ckpt;
            auto net = load_net(ckpt);
            mb_plan* raw = nullptr;
            check(mb_select(net.get(), &raw), "select");
            PlanPtr plan(raw);
            const fs::path out = dir / "plan.json";
            check(mb_plan_save(plan.get(), net.get(), out.c_str()), "writing plan");
            std::printf("plan: %s\nwrote %s\n", plan_string(plan.get()).c_str(), out.c_str());
        } else if (retrain->parsed()) {
            auto cfg = load_config(retrain_opts);
            const fs::path dir = out_dir_for(retrain_opts, cfg.get());
            auto data = load_data(cfg.get());
            mb_net* raw = nullptr;
            check(mb_net_from_config(cfg.get(), data.get(), &raw), "building network");
            NetPtr net(raw);
            if (!retrain_init.empty()) {
                auto init = load_net(retrain_init);
                check(mb_net_copy_weights(init.get(), net.get()), "copying initial weights");
            }
            auto plan = parse_plan(retrain_plan, net.get());
            mb_retrain_summary summary{};
            check(mb_retrain(net.get(), data.get(), plan.get(), cfg.get(), &summary), "retrain");
            const fs::path ckpt = dir / "retrained.json";
            check(mb_net_save(net.get(), ckpt.c_str()), "saving checkpoint");
            check(mb_plan_save(plan.get(), net.get(), (dir / "plan.json").c_str()), "writing plan");
            write_manifest(cfg.get(), "retrain", dir);
            std::printf("retrain: %zu epochs, loss %.4f, train acc %.4f, test acc %.4f%s\n", summary.epochs_run,
                        summary.final_train_loss, summary.train_accuracy, summary.test_accuracy,
                        summary.low_bit ? " (low-bit schedule)" : "");
            std::printf("wrote %s\n", ckpt.c_str());
        } else if (eval->parsed()) {
            auto cfg = load_config(eval_opts);
            const fs::path dir = out_dir_for(eval_opts, cfg.get());
            auto data = load_data(cfg.get());
            auto net = load_net(eval_ckpt.empty() ? (dir / "retrained.json").string() : eval_ckpt);
            const auto labels = labels_of(data.get(), eval_split);
            std::vector<int32_t> pred(labels.size());
            double acc = 0.0;
            check(mb_evaluate(net.get(), data.get(), eval_split.c_str(), &acc, pred.data(), pred.size()), "eval");
            const fs::path out = dir / ("predictions_eval_" + eval_split + ".csv");
            check(mb_write_predictions(out.c_str(), pred.data(), labels.data(), pred.size()), "writing predictions");
            std::printf("accuracy %.4f on %zu samples\nwrote %s\n", acc, pred.size(), out.c_str());
        } else if (export_bd->parsed()) {
            const fs::path dir = out_dir_for(export_opts, nullptr);
            auto net = load_net(export_ckpt.empty() ? (dir / "retrained.json").string() : export_ckpt);
            const std::string path = export_path.empty() ? (dir / "model.mbbd").string() : export_path;
            check(mb_bd_export(net.get(), path.c_str()), "export-bd");
            std::printf("wrote %s\n", path.c_str());
        } else if (infer_bd->parsed()) {
            auto cfg = load_config(infer_opts);
            const fs::path dir = out_dir_for(infer_opts, cfg.get());
            auto data = load_data(cfg.get());
            const std::string path = infer_model.empty() ? (dir / "model.mbbd").string() : infer_model;
            mb_bd_model* raw = nullptr;
            check(mb_bd_load(path.c_str(), &raw), "loading " + path);
            BDPtr model(raw);
            const auto labels = labels_of(data.get(), infer_split);
            std::vector<int32_t> pred(labels.size());
            check(mb_bd_infer(model.get(), data.get(), infer_split.c_str(), pred.data(), pred.size(), nullptr, 0),
                  "infer-bd");
            size_t correct = 0;
            for (size_t i = 0; i < pred.size(); ++i)
                correct += pred[i] == labels[i] ? 1 : 0;
            const fs::path out = dir / ("predictions_bd_" + infer_split + ".csv");
            check(mb_write_predictions(out.c_str(), pred.data(), labels.data(), pred.size()), "writing predictions");
            std::printf("accuracy %.4f on %zu samples\nwrote %s\n",
                        pred.empty() ? 0.0 : double(correct) / double(pred.size()), pred.size(), out.c_str());
        } else if (flops->parsed()) {
            NetPtr net;
            if (!flops_ckpt.empty()) {
                net = load_net(flops_ckpt);
            } else {
                mb_net* raw = nullptr;
                check(mb_net_create(flops_arch.c_str(), flops_classes, nullptr, 0, 0, 0, &raw), "building network");
                net.reset(raw);
            }
            PlanPtr plan;
            if (!flops_plan.empty())
                plan = parse_plan(flops_plan, net.get());
            fs::create_directories(flops_out);
            const fs::path csv = fs::path(flops_out) / "cost.csv";
            double mflops = 0.0;
            check(mb_flops(net.get(), plan.get(), csv.c_str(), &mflops), "flops");
            std::printf("%.6g MFLOPs\nwrote %s\n", mflops, csv.c_str());
        } else if (random_plan->parsed()) {
            auto cfg = load_config(random_opts);
            const fs::path dir = out_dir_for(random_opts, cfg.get());
            auto data = load_data(cfg.get());
            mb_net* raw = nullptr;
            check(mb_net_from_config(cfg.get(), data.get(), &raw), "building network");
            NetPtr net(raw);
            mb_plan* plan_raw = nullptr;
            check(mb_random_plan(net.get(), random_lo, random_hi, random_seed, &plan_raw), "random-plan");
            PlanPtr plan(plan_raw);
            const std::string path = random_path.empty() ? (dir / "random_plan.json").string() : random_path;
            check(mb_plan_save(plan.get(), net.get(), path.c_str()), "writing plan");
            double mflops = 0.0;
            check(mb_flops(net.get(), plan.get(), nullptr, &mflops), "flops");
            std::printf("plan: %s (%.6g MFLOPs)\nwrote %s\n", plan_string(plan.get()).c_str(), mflops, path.c_str());
        } else if (bench->parsed()) {
            mb_bench_result r{};
            check(mb_bench_kernel(bench_cin, bench_cout, bench_kernel, bench_hw, bench_w, bench_x, bench_reps, &r),
                  "bench");
            std::printf("W%d-A%d %zux%zu %zu->%zu @%zux%zu: median %.1f us, %llu AND word-ops, %llu shift-adds\n",
                        bench_w, bench_x, bench_kernel, bench_kernel, bench_cin, bench_cout, bench_hw, bench_hw,
                        r.median_ns / 1e3, static_cast<unsigned long long>(r.and_word_ops),
                        static_cast<unsigned long long>(r.shift_adds));
        } else if (gradcheck->parsed()) {
            mb_gradcheck_result r{};
            check(mb_gradcheck(grad_seed, grad_sto ? 1 : 0, grad_coords, &r), "gradcheck");
            std::printf("max relative error over %zu coords: r %.3e, s %.3e, alpha %.3e\n", r.coords, r.r_error,
                        r.s_error, r.alpha_error);
        }
    } catch (const Failure& f) {
        const std::string detail = mb_last_error();
        if (detail.empty())
            std::fprintf(stderr, "mixbit: %s (%s)\n", f.context.c_str(), mb_status_name(f.status));
        else
            std::fprintf(stderr, "mixbit: %s: %s (%s)\n", f.context.c_str(), detail.c_str(), mb_status_name(f.status));
        return exit_code_for(f.status);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mixbit: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
