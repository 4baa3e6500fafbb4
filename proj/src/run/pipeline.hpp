// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>

#include "bd/bdmodel.hpp"
#include "run/config.hpp"
#include "search/search.hpp"

namespace mixbit {

struct SearchStageResult {
    SearchResult search;
    double target_mflops = 0.0;
    double plan_mflops = 0.0;
};

// Runs the search, leaves the best-epoch strengths in `net`, and when out_dir
// is given writes history.csv, plan.json, distribution.csv, manifest.json and
// the search checkpoint (search.json + search.json.bin).
SearchStageResult search_stage(MixedPrecNet& net, const Dataset& data, const RunConfig& config,
                               const std::optional<std::filesystem::path>& out_dir);

// "uniform:N" or a plan.json path.
NetworkPlan parse_plan_spec(const std::string& spec, std::size_t quantized_layers);

struct GradcheckReport {
    double r_error = 0.0;
    double s_error = 0.0;
    double alpha_error = 0.0;
    std::size_t r_coords = 0;
    std::size_t s_coords = 0;
    std::size_t alpha_coords = 0;
};

// Finite-difference checks of the strength and clipping gradients on one
// search-mode conv layer with a linear head. Points are drawn away from every
// rounding boundary.
GradcheckReport gradient_check(std::uint64_t seed, bool stochastic, std::size_t coords = 100);

// Predicted class per row, ties to the lowest index.
std::vector<std::int32_t> argmax_rows(const Tensor& logits);

// BD inference over a split in batches; returns logits N x classes.
Tensor bd_infer_split(const BDModel& model, const Dataset& data, const std::string& split,
                      std::size_t batch_size = 256);

} // namespace mixbit
