// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "net/checkpoint.hpp"
#include "run/config.hpp"
#include "run/pipeline.hpp"
#include "run/report.hpp"

using namespace mixbit;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({"target_fraction": 0.3})";

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p)
{
    const std::string s = slurp(p);
    return std::size_t(std::count(s.begin(), s.end(), '\n'));
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("mixbit_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("config: defaults, unknown keys, validation")
{
    const RunConfig c = parse_config_text(kMinimal);
    CHECK(c.arch == "tinynet");
    CHECK(c.lambda == doctest::Approx(0.06));
    CHECK(c.search.strength_lr == doctest::Approx(0.02));
    CHECK(c.search.tau_start == doctest::Approx(1.0));
    CHECK(c.search.tau_end == doctest::Approx(0.4));

    auto kind_of = [](const std::string& text) {
        try {
            parse_config_text(text);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::State;
    };
    CHECK(kind_of(R"({"target_fraction": 0.3, "lamda": 1})") == ErrorKind::Config);
    CHECK(kind_of(R"({"target_fraction": 0.3, "search": {"epoch": 1}})") == ErrorKind::Config);
    CHECK(kind_of(R"({"target_fraction": 0.3, "lambda": -1})") == ErrorKind::Config);
    CHECK(kind_of(R"({"lambda": 0.1})") == ErrorKind::Config);
    CHECK(kind_of(R"({"target_fraction": 0.3, "target_mflops": 2})") == ErrorKind::Config);
    CHECK(kind_of(R"({"target_fraction": 0.3, "bits": [2, 1]})") == ErrorKind::Config);
    CHECK(kind_of(R"({"target_fraction": 0.3, "dataset": {"kind": "cifar10", "dir": "/nonexistent"}})")
          == ErrorKind::Config);
    CHECK(kind_of(R"({"target_fraction": 0.3, "mode": "fast"})") == ErrorKind::Config);
    CHECK(kind_of("{not json") == ErrorKind::Config);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("config: dotted overrides, canonical dump, hash")
{
    RunConfig c = parse_config_text(kMinimal);
    const std::string h0 = config_hash(c);
    CHECK(h0.size() == 16);
    set_config_value(c, "search.epochs", "3");
    CHECK(c.search.epochs == 3);
    set_config_value(c, "mode", "sto");
    CHECK(c.mode == "sto");
    set_config_value(c, "target_mflops", "0.2");
    CHECK(c.target_fraction == 0.0);
    CHECK_THROWS_AS(set_config_value(c, "search.nope", "1"), Error);
    CHECK(config_hash(c) != h0);

    const RunConfig again = parse_config(config_to_json(c));
    CHECK(config_hash(again) == config_hash(c));
}

TEST_CASE("config: target resolution")
{
    RunConfig c = parse_config_text(kMinimal);
    const auto net = build_net(c, 10, 16);
    const auto costs = net.layer_costs();
    const double max = network_flops(NetworkPlan::uniform(3, 5), costs) / 1e6;
    CHECK(resolve_target_mflops(c, net) == doctest::Approx(0.3 * max));
    set_config_value(c, "target_mflops", "0.25");
    CHECK(resolve_target_mflops(c, net) == doctest::Approx(0.25));
    CHECK(net.alphas()[0] == doctest::Approx(6.0));
}

TEST_CASE("number formatting is locale independent")
{
    CHECK(format_sig3(17.8132) == "17.8");
    CHECK(format_sig3(0.0012345) == "0.00123");
    CHECK(format_real(0.5) == "0.5");
}

TEST_CASE("reports: history, plan, distribution, cost")
{
    const fs::path dir = scratch("reports");
    write_history_csv({}, dir / "empty.csv");
    CHECK(slurp(dir / "empty.csv") == "epoch,train_loss,valid_loss,valid_acc,expected_mflops,tau\n");

    std::vector<HistoryRow> rows(4);
    for (std::size_t i = 0; i < 4; ++i)
        rows[i].epoch = i + 1;
    write_history_csv(rows, dir / "history.csv");
    CHECK(line_count(dir / "history.csv") == 5);

    auto net = MixedPrecNet::tinynet(10, BitwidthSet(), 0);
    const NetworkPlan plan{{{1, 2}, {3, 4}, {5, 5}}};
    write_plan_json(plan, quantized_layer_names(net), net.strengths(), net.bits(), dir / "plan.json");
    CHECK(read_plan_json(dir / "plan.json") == plan);
    const auto doc = nlohmann::json::parse(slurp(dir / "plan.json"));
    CHECK(doc["layers"].size() == 3);
    CHECK(doc["layers"][1]["s"].size() == 5);

    write_distribution_csv(plan, dir / "distribution.csv");
    CHECK(slurp(dir / "distribution.csv") == "layer,b_w,b_x\n0,1,2\n1,3,4\n2,5,5\n");

    write_cost_csv(net.layer_costs(), &plan, dir / "cost.csv");
    CHECK(line_count(dir / "cost.csv") == net.layer_costs().size() + 1);
    CHECK(slurp(dir / "cost.csv").find('\r') == std::string::npos);

    CHECK(parse_plan_spec("uniform:3", 3) == NetworkPlan::uniform(3, 3));
    CHECK(parse_plan_spec((dir / "plan.json").string(), 3) == plan);
    CHECK_THROWS_AS(parse_plan_spec("uniform:x", 3), Error);
    CHECK_THROWS_AS(parse_plan_spec((dir / "plan.json").string(), 4), Error);
    CHECK_THROWS_AS(parse_plan_spec((dir / "none.json").string(), 3), Error);
}

TEST_CASE("manifest carries hash, seed and config")
{
    const fs::path dir = scratch("manifest");
    const RunConfig c = parse_config_text(kMinimal);
    write_manifest(c, "search", dir / "manifest.json");
    const auto doc = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(doc["config_hash"] == config_hash(c));
    CHECK(doc["command"] == "search");
    CHECK(parse_config(doc["config"]).seed == c.seed);
}

TEST_CASE("search stage writes every artifact and is reproducible")
{
    const fs::path dir = scratch("stage");
    RunConfig c = parse_config_text(R"({"target_fraction": 0.3,
        "dataset": {"per_class": 6, "test_per_class": 2},
        "search": {"epochs": 2, "batch_size": 16}})");
    const Dataset data = load_dataset(c.dataset);
    auto net = build_net(c, data.num_classes, data.height);
    const auto r = search_stage(net, data, c, dir / "a");
    for (const char* f : {"history.csv", "plan.json", "distribution.csv", "manifest.json", "search.json"})
        CHECK(fs::exists(dir / "a" / f));
    CHECK(line_count(dir / "a" / "history.csv") == 3);
    CHECK(line_count(dir / "a" / "distribution.csv") == 4);

    auto net2 = build_net(c, data.num_classes, data.height);
    const auto r2 = search_stage(net2, data, c, dir / "b");
    CHECK(r2.search.plan == r.search.plan);
    CHECK(slurp(dir / "a" / "history.csv") == slurp(dir / "b" / "history.csv"));
    CHECK(slurp(dir / "a" / "search.json.bin") == slurp(dir / "b" / "search.json.bin"));

    // plan.json feeds retraining directly.
    const auto plan = parse_plan_spec((dir / "a" / "plan.json").string(), 3);
    CHECK(plan == r.search.plan);
    auto loaded = load_checkpoint(dir / "a" / "search.json");
    CHECK(select_plan(loaded.strengths(), loaded.bits()) == r.search.plan);
}

TEST_CASE("gradient check report")
{
    const auto det = gradient_check(1, false, 10);
    CHECK(det.r_error < 1e-4);
    CHECK(det.s_error < 1e-4);
    CHECK(det.alpha_coords == 10);
    const auto sto = gradient_check(1, true, 10);
    CHECK(sto.r_error < 1e-4);
    CHECK(sto.s_error < 1e-4);
}
