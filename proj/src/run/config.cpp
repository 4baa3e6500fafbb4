// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "run/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cost/costmodel.hpp"
#include "error.hpp"

namespace mixbit {

using json = nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed)
{
    require(obj.is_object(), ErrorKind::Config, where + " must be a JSON object");
    for (const auto& [k, v] : obj.items())
        require(allowed.count(k) > 0, ErrorKind::Config,
                "unknown key '" + (where == "config" ? k : where + "." + k) + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where)
{
    if (!obj.contains(key))
        return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::Config, "key '" + where + key + "' has the wrong type");
    }
}

} // namespace

RunConfig parse_config(const json& doc)
{
    RunConfig c;
    check_keys(doc, "config",
               {"dataset", "arch", "bits", "mode", "lambda", "target_mflops", "target_fraction", "alpha_init", "seed",
                "out_dir", "search", "retrain"});
    if (doc.contains("dataset")) {
        const auto& d = doc["dataset"];
        check_keys(d, "dataset",
                   {"kind", "classes", "per_class", "test_per_class", "hw", "dir", "subset", "normalize", "seed"});
        read(d, "kind", c.dataset.kind, "dataset.");
        read(d, "classes", c.dataset.classes, "dataset.");
        read(d, "per_class", c.dataset.per_class, "dataset.");
        read(d, "test_per_class", c.dataset.test_per_class, "dataset.");
        read(d, "hw", c.dataset.hw, "dataset.");
        read(d, "dir", c.dataset.dir, "dataset.");
        read(d, "subset", c.dataset.subset, "dataset.");
        read(d, "normalize", c.dataset.normalize, "dataset.");
        read(d, "seed", c.dataset.seed, "dataset.");
    }
    read(doc, "arch", c.arch, "");
    read(doc, "bits", c.bits, "");
    read(doc, "mode", c.mode, "");
    read(doc, "lambda", c.lambda, "");
    read(doc, "target_mflops", c.target_mflops, "");
    read(doc, "target_fraction", c.target_fraction, "");
    read(doc, "alpha_init", c.alpha_init, "");
    read(doc, "seed", c.seed, "");
    read(doc, "out_dir", c.out_dir, "");
    if (doc.contains("search")) {
        const auto& s = doc["search"];
        check_keys(s, "search",
                   {"epochs", "batch_size", "weight_lr", "momentum", "weight_decay", "strength_lr", "tau_start",
                    "tau_end", "warmup_epochs"});
        read(s, "epochs", c.search.epochs, "search.");
        read(s, "batch_size", c.search.batch_size, "search.");
        read(s, "weight_lr", c.search.weight_lr, "search.");
        read(s, "momentum", c.search.momentum, "search.");
        read(s, "weight_decay", c.search.weight_decay, "search.");
        read(s, "strength_lr", c.search.strength_lr, "search.");
        read(s, "tau_start", c.search.tau_start, "search.");
        read(s, "tau_end", c.search.tau_end, "search.");
        read(s, "warmup_epochs", c.search.warmup_epochs, "search.");
    }
    if (doc.contains("retrain")) {
        const auto& r = doc["retrain"];
        check_keys(r, "retrain",
                   {"epochs", "batch_size", "lr", "momentum", "weight_decay_high", "weight_decay_low", "augment"});
        read(r, "epochs", c.retrain.epochs, "retrain.");
        read(r, "batch_size", c.retrain.batch_size, "retrain.");
        read(r, "lr", c.retrain.lr, "retrain.");
        read(r, "momentum", c.retrain.momentum, "retrain.");
        read(r, "weight_decay_high", c.retrain.weight_decay_high, "retrain.");
        read(r, "weight_decay_low", c.retrain.weight_decay_low, "retrain.");
        read(r, "augment", c.retrain.augment, "retrain.");
    }

    require(c.dataset.kind == "synthetic" || c.dataset.kind == "cifar10", ErrorKind::Config,
            "dataset.kind must be 'synthetic' or 'cifar10'");
    if (c.dataset.kind == "cifar10")
        require(std::filesystem::is_directory(c.dataset.dir), ErrorKind::Config,
                "dataset.dir '" + c.dataset.dir + "' is not a directory");
    require(c.dataset.classes >= 2, ErrorKind::Config, "dataset.classes must be >= 2");
    require(c.arch == "tinynet" || c.arch == "resnet20", ErrorKind::Config, "arch must be 'tinynet' or 'resnet20'");
    try {
        BitwidthSet check(c.bits);
    } catch (const Error& e) {
        fail(ErrorKind::Config, std::string("bits: ") + e.what());
    }
    require(c.mode == "det" || c.mode == "sto", ErrorKind::Config, "mode must be 'det' or 'sto'");
    require(c.lambda >= 0.0, ErrorKind::Config, "lambda must be >= 0");
    require(c.target_mflops >= 0.0 && c.target_fraction >= 0.0, ErrorKind::Config, "targets must be non-negative");
    require((c.target_mflops > 0.0) != (c.target_fraction > 0.0), ErrorKind::Config,
            "exactly one of target_mflops and target_fraction must be positive");
    require(c.alpha_init > 0.0, ErrorKind::Config, "alpha_init must be positive");
    require(c.search.batch_size >= 2 && c.retrain.batch_size >= 2, ErrorKind::Config, "batch sizes must be >= 2");
    require(c.search.weight_lr > 0.0 && c.search.strength_lr > 0.0 && c.retrain.lr > 0.0, ErrorKind::Config,
            "learning rates must be positive");
    require(c.search.tau_start > 0.0 && c.search.tau_end > 0.0, ErrorKind::Config, "tau must stay positive");
    return c;
}

RunConfig parse_config_text(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    require(in.good(), ErrorKind::Config, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

json config_to_json(const RunConfig& c)
{
    json d = {{"kind", c.dataset.kind},       {"classes", c.dataset.classes}, {"per_class", c.dataset.per_class},
              {"test_per_class", c.dataset.test_per_class}, {"hw", c.dataset.hw},     {"dir", c.dataset.dir},
              {"subset", c.dataset.subset},   {"normalize", c.dataset.normalize}, {"seed", c.dataset.seed}};
    json s = {{"epochs", c.search.epochs},           {"batch_size", c.search.batch_size},
              {"weight_lr", c.search.weight_lr},     {"momentum", c.search.momentum},
              {"weight_decay", c.search.weight_decay}, {"strength_lr", c.search.strength_lr},
              {"tau_start", c.search.tau_start},     {"tau_end", c.search.tau_end},
              {"warmup_epochs", c.search.warmup_epochs}};
    json r = {{"epochs", c.retrain.epochs},
              {"batch_size", c.retrain.batch_size},
              {"lr", c.retrain.lr},
              {"momentum", c.retrain.momentum},
              {"weight_decay_high", c.retrain.weight_decay_high},
              {"weight_decay_low", c.retrain.weight_decay_low},
              {"augment", c.retrain.augment}};
    return {{"dataset", d},           {"arch", c.arch},
            {"bits", c.bits},         {"mode", c.mode},
            {"lambda", c.lambda},     {"target_mflops", c.target_mflops},
            {"target_fraction", c.target_fraction}, {"alpha_init", c.alpha_init},
            {"seed", c.seed},         {"out_dir", c.out_dir},
            {"search", s},            {"retrain", r}};
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& json_value)
{
    json doc = config_to_json(config);
    json value;
    try {
        value = json::parse(json_value);
    } catch (const json::exception&) {
        // Bare words are taken as strings.
        value = json_value;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        require(node->is_object() && node->contains(part), ErrorKind::Config, "unknown key '" + key + "'");
        node = &(*node)[part];
        if (dot == std::string::npos)
            break;
        start = dot + 1;
    }
    *node = value;
    // A new target of one kind replaces the other.
    if (key == "target_mflops" && value.is_number() && value.get<double>() > 0)
        doc["target_fraction"] = 0.0;
    if (key == "target_fraction" && value.is_number() && value.get<double>() > 0)
        doc["target_mflops"] = 0.0;
    config = parse_config(doc);
}

std::string config_hash(const RunConfig& config)
{
    const std::string text = config_to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Dataset load_dataset(const DatasetSpec& spec)
{
    if (spec.kind == "cifar10")
        return load_cifar10(spec.dir, spec.normalize, spec.subset, spec.seed);
    return gen_synthetic(spec.classes, spec.per_class, spec.hw, spec.seed, spec.test_per_class);
}

MixedPrecNet build_net(const RunConfig& config, int num_classes, std::size_t input_hw)
{
    MixedPrecNet net = MixedPrecNet::build(config.arch, num_classes, BitwidthSet(config.bits), config.seed, input_hw);
    net.set_alphas(std::vector<double>(net.quantized_layer_count(), config.alpha_init));
    return net;
}

double resolve_target_mflops(const RunConfig& config, const MixedPrecNet& net)
{
    if (config.target_mflops > 0.0)
        return config.target_mflops;
    const auto plan = NetworkPlan::uniform(net.quantized_layer_count(), net.bits().largest());
    return config.target_fraction * network_flops(plan, net.layer_costs()) / kMega;
}

SearchConfig effective_search_config(const RunConfig& config, const MixedPrecNet& net)
{
    SearchConfig s = config.search;
    s.lambda = config.lambda;
    s.target_mflops = resolve_target_mflops(config, net);
    s.stochastic = config.mode == "sto";
    s.seed = config.seed;
    return s;
}

RetrainConfig effective_retrain_config(const RunConfig& config)
{
    RetrainConfig r = config.retrain;
    r.seed = config.seed;
    return r;
}

} // namespace mixbit
