// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "run/report.hpp"

#include <charconv>
#include <fstream>

#include <json.hpp>

#include "error.hpp"
#include "quant/quantizer.hpp"

namespace mixbit {

using json = nlohmann::json;

inline constexpr const char* kVersionString = "0.1.0";

std::string format_real(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string format_sig3(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 3);
    return std::string(buf, r.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::Io, "cannot open " + path.string() + " for writing");
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    require(out.good(), ErrorKind::Io, "write failed for " + path.string());
}

} // namespace

void write_history_csv(std::span<const HistoryRow> rows, const std::filesystem::path& path)
{
    auto out = open_out(path);
    out << "epoch,train_loss,valid_loss,valid_acc,expected_mflops,tau\n";
    for (const auto& r : rows)
        out << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.valid_loss) << ','
            << format_real(r.valid_acc) << ',' << format_sig3(r.expected_mflops) << ',' << format_real(r.tau) << '\n';
    finish(out, path);
}

void write_plan_json(const NetworkPlan& plan, const std::vector<std::string>& layer_names,
                     std::span<const LayerStrengths> strengths, const BitwidthSet& bits,
                     const std::filesystem::path& path)
{
    json layers = json::array();
    for (std::size_t q = 0; q < plan.layers.size(); ++q) {
        json l = {{"index", q}, {"b_w", plan.layers[q].weight_bits}, {"b_x", plan.layers[q].act_bits}};
        if (q < layer_names.size())
            l["name"] = layer_names[q];
        if (q < strengths.size()) {
            l["r"] = strengths[q].weight;
            l["s"] = strengths[q].activation;
        }
        layers.push_back(l);
    }
    json doc = {{"bits", std::vector<int>(bits.bits().begin(), bits.bits().end())}, {"layers", layers}};
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
    finish(out, path);
}

NetworkPlan read_plan_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open plan " + path.string());
    try {
        json doc;
        in >> doc;
        NetworkPlan plan;
        for (const auto& l : doc.at("layers"))
            plan.layers.push_back({l.at("b_w").get<int>(), l.at("b_x").get<int>()});
        for (const auto& lb : plan.layers)
            for (int b : {lb.weight_bits, lb.act_bits})
                require(b == kBypassBits || (b >= 1 && b <= 16), ErrorKind::Format,
                        path.string() + ": invalid bitwidth " + std::to_string(b));
        return plan;
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, "malformed plan " + path.string() + ": " + e.what());
    }
}

void write_distribution_csv(const NetworkPlan& plan, const std::filesystem::path& path)
{
    auto out = open_out(path);
    out << "layer,b_w,b_x\n";
    for (std::size_t q = 0; q < plan.layers.size(); ++q)
        out << q << ',' << plan.layers[q].weight_bits << ',' << plan.layers[q].act_bits << '\n';
    finish(out, path);
}

void write_cost_csv(std::span<const LayerCost> costs, const NetworkPlan* plan, const std::filesystem::path& path)
{
    auto out = open_out(path);
    out << "layer,name,quantized,macs,b_w,b_x,mflops\n";
    std::size_t q = 0, i = 0;
    for (const auto& c : costs) {
        int bw = kBypassBits, bx = kBypassBits;
        if (c.quantized && plan) {
            require(q < plan->layers.size(), ErrorKind::InvalidArgument, "plan is shorter than the network");
            bw = plan->layers[q].weight_bits;
            bx = plan->layers[q].act_bits;
        }
        if (c.quantized)
            ++q;
        const bool full = bw == kBypassBits || bx == kBypassBits || !c.quantized;
        const double f = full ? c.macs : flop_pair(c.macs, bw, bx);
        out << i++ << ',' << c.name << ',' << (c.quantized ? 1 : 0) << ',' << format_real(c.macs) << ','
            << (c.quantized ? bw : 32) << ',' << (c.quantized ? bx : 32) << ',' << format_sig3(f / kMega) << '\n';
    }
    finish(out, path);
}

void write_predictions_csv(std::span<const std::int32_t> predictions, std::span<const std::int32_t> labels,
                           const std::filesystem::path& path)
{
    auto out = open_out(path);
    out << "index,prediction,label\n";
    for (std::size_t i = 0; i < predictions.size(); ++i)
        out << i << ',' << predictions[i] << ',' << (i < labels.size() ? labels[i] : -1) << '\n';
    finish(out, path);
}

void write_manifest(const RunConfig& config, const std::string& command, const std::filesystem::path& path)
{
    json doc = {{"command", command},
                {"config_hash", config_hash(config)},
                {"seed", config.seed},
                {"version", kVersionString},
                {"compiler", __VERSION__},
                {"config", config_to_json(config)}};
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
    finish(out, path);
}

std::vector<std::string> quantized_layer_names(const MixedPrecNet& net)
{
    std::vector<std::string> names;
    for (const auto& c : net.convs())
        if (c.quantize)
            names.push_back(c.name);
    return names;
}

void emit_report(std::span<const HistoryRow> history, const NetworkPlan& plan, const MixedPrecNet& net,
                 std::span<const LayerStrengths> strengths, const std::filesystem::path& out_dir)
{
    std::filesystem::create_directories(out_dir);
    write_history_csv(history, out_dir / "history.csv");
    write_plan_json(plan, quantized_layer_names(net), strengths, net.bits(), out_dir / "plan.json");
    write_distribution_csv(plan, out_dir / "distribution.csv");
}

} // namespace mixbit
