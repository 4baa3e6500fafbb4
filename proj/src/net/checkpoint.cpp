// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "net/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "error.hpp"

namespace mixbit {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

std::filesystem::path blob_path_for(const std::filesystem::path& manifest_path)
{
    auto p = manifest_path;
    p += ".bin";
    return p;
}

namespace {

const char* mode_name(NetMode m)
{
    switch (m) {
    case NetMode::SearchDeterministic: return "det";
    case NetMode::SearchStochastic: return "sto";
    case NetMode::Fixed: return "fixed";
    }
    return "det";
}

json plan_to_json(const NetworkPlan& plan)
{
    json a = json::array();
    for (const auto& lb : plan.layers)
        a.push_back({lb.weight_bits, lb.act_bits});
    return a;
}

NetworkPlan plan_from_json(const json& a)
{
    NetworkPlan plan;
    for (const auto& e : a)
        plan.layers.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    return plan;
}

} // namespace

void save_checkpoint(const MixedPrecNet& net, const std::filesystem::path& manifest_path)
{
    json m;
    m["format"] = "mixbit-checkpoint";
    m["version"] = 1;
    m["arch"] = net.arch();
    m["classes"] = net.num_classes();
    m["input_hw"] = net.input_hw();
    m["bits"] = std::vector<int>(net.bits().bits().begin(), net.bits().bits().end());
    m["mode"] = mode_name(net.mode());
    m["bn_frozen"] = net.bn_frozen();
    if (net.plan())
        m["plan"] = plan_to_json(*net.plan());
    m["alpha"] = net.alphas();
    json st = json::array();
    for (const auto& s : net.strengths())
        st.push_back({{"r", s.weight}, {"s", s.activation}});
    m["strengths"] = st;

    const auto blob = blob_path_for(manifest_path);
    m["blob"] = blob.filename().string();
    std::ofstream bin(blob, std::ios::binary);
    require(bin.good(), ErrorKind::Io, "cannot open " + blob.string() + " for writing");
    json table = json::array();
    std::size_t offset = 0;
    for (const auto& [name, t] : net.named_tensors()) {
        table.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}, {"count", t->size()}});
        bin.write(reinterpret_cast<const char*>(t->ptr()), static_cast<std::streamsize>(t->size() * sizeof(double)));
        offset += t->size() * sizeof(double);
    }
    require(bin.good(), ErrorKind::Io, "write failed for " + blob.string());
    m["tensors"] = table;

    std::ofstream out(manifest_path);
    require(out.good(), ErrorKind::Io, "cannot open " + manifest_path.string() + " for writing");
    out << m.dump(2) << '\n';
    require(out.good(), ErrorKind::Io, "write failed for " + manifest_path.string());
}

MixedPrecNet load_checkpoint(const std::filesystem::path& manifest_path)
{
    std::ifstream in(manifest_path);
    require(in.good(), ErrorKind::Io, "cannot open checkpoint " + manifest_path.string());
    json m;
    try {
        in >> m;
        require(m.at("format") == "mixbit-checkpoint", ErrorKind::Format,
                manifest_path.string() + " is not a mixbit checkpoint");
        BitwidthSet bits(m.at("bits").get<std::vector<int>>());
        MixedPrecNet net = MixedPrecNet::build(m.at("arch").get<std::string>(), m.at("classes").get<int>(), bits, 0,
                                               m.at("input_hw").get<std::size_t>());

        const auto blob = manifest_path.parent_path() / m.at("blob").get<std::string>();
        std::ifstream bin(blob, std::ios::binary);
        require(bin.good(), ErrorKind::Io, "cannot open checkpoint blob " + blob.string());
        std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

        auto targets = net.named_tensors();
        const auto& table = m.at("tensors");
        require(table.size() == targets.size(), ErrorKind::Format,
                "checkpoint has " + std::to_string(table.size()) + " tensors, architecture expects "
                    + std::to_string(targets.size()));
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const auto& e = table[i];
            auto& [name, t] = targets[i];
            require(e.at("name") == name, ErrorKind::Format,
                    "checkpoint tensor " + std::to_string(i) + " is '" + e.at("name").get<std::string>()
                        + "', expected '" + name + "'");
            require(e.at("shape").get<Shape>() == t->shape(), ErrorKind::Format, "shape mismatch for " + name);
            const auto offset = e.at("offset").get<std::size_t>();
            const auto count = e.at("count").get<std::size_t>();
            require(count == t->size() && offset + count * sizeof(double) <= bytes.size(), ErrorKind::Format,
                    "blob range out of bounds for " + name);
            std::memcpy(t->ptr(), bytes.data() + offset, count * sizeof(double));
            t->check_finite(name.c_str());
        }

        net.set_alphas(m.at("alpha").get<std::vector<double>>());
        std::vector<LayerStrengths> st;
        for (const auto& e : m.at("strengths"))
            st.push_back({e.at("r").get<std::vector<double>>(), e.at("s").get<std::vector<double>>()});
        net.set_strengths(st);
        const auto mode = m.at("mode").get<std::string>();
        if (mode == "fixed")
            net.set_fixed_plan(plan_from_json(m.at("plan")));
        else
            net.set_search_mode(mode == "sto");
        net.set_bn_frozen(m.value("bn_frozen", false));
        return net;
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, "malformed checkpoint " + manifest_path.string() + ": " + e.what());
    }
}

void copy_weights(const MixedPrecNet& src, MixedPrecNet& dst)
{
    require(src.arch() == dst.arch() && src.num_classes() == dst.num_classes() && src.input_hw() == dst.input_hw(),
            ErrorKind::InvalidArgument, "copy_weights: architectures differ");
    const auto from = src.named_tensors();
    auto to = dst.named_tensors();
    for (std::size_t i = 0; i < to.size(); ++i)
        *to[i].second = *from[i].second;
    dst.set_alphas(src.alphas());
}

} // namespace mixbit
