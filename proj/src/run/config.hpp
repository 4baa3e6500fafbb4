// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "data/dataset.hpp"
#include "net/network.hpp"
#include "search/search.hpp"

namespace mixbit {

struct DatasetSpec {
    std::string kind = "synthetic"; // synthetic | cifar10
    int classes = 10;
    std::size_t per_class = 50;
    std::size_t test_per_class = 10;
    std::size_t hw = 16;
    std::string dir;
    std::size_t subset = 5000;
    bool normalize = true;
    std::uint64_t seed = 0;
};

// Everything a run needs. Targets are in MFLOPs; target_fraction, when set,
// means that fraction of the uniform largest-bitwidth plan's cost.
struct RunConfig {
    DatasetSpec dataset;
    std::string arch = "tinynet";
    std::vector<int> bits = {1, 2, 3, 4, 5};
    std::string mode = "det";
    double lambda = 0.06;
    double target_mflops = 0.0;
    double target_fraction = 0.0;
    double alpha_init = 6.0;
    std::uint64_t seed = 0;
    std::string out_dir = "run";
    SearchConfig search;
    RetrainConfig retrain;
};

RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& config);

// Sets one dotted key ("search.epochs") from a JSON literal and revalidates.
void set_config_value(RunConfig& config, const std::string& key, const std::string& json_value);

// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& config);

Dataset load_dataset(const DatasetSpec& spec);
MixedPrecNet build_net(const RunConfig& config, int num_classes, std::size_t input_hw);
double resolve_target_mflops(const RunConfig& config, const MixedPrecNet& net);
// SearchConfig with the run-level lambda, target, mode and seed folded in.
SearchConfig effective_search_config(const RunConfig& config, const MixedPrecNet& net);
RetrainConfig effective_retrain_config(const RunConfig& config);

} // namespace mixbit
