// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cost/costmodel.hpp"
#include "run/config.hpp"
#include "search/search.hpp"

namespace mixbit {

// Shortest round-trip text for a double, independent of the C locale.
std::string format_real(double v);
// Three significant digits, for MFLOPs.
std::string format_sig3(double v);

void write_history_csv(std::span<const HistoryRow> rows, const std::filesystem::path& path);

// Per-layer b_w/b_x plus, when given, the strengths behind each choice.
void write_plan_json(const NetworkPlan& plan, const std::vector<std::string>& layer_names,
                     std::span<const LayerStrengths> strengths, const BitwidthSet& bits,
                     const std::filesystem::path& path);
NetworkPlan read_plan_json(const std::filesystem::path& path);

void write_distribution_csv(const NetworkPlan& plan, const std::filesystem::path& path);

void write_cost_csv(std::span<const LayerCost> costs, const NetworkPlan* plan, const std::filesystem::path& path);

void write_predictions_csv(std::span<const std::int32_t> predictions, std::span<const std::int32_t> labels,
                           const std::filesystem::path& path);

void write_manifest(const RunConfig& config, const std::string& command, const std::filesystem::path& path);

// Writes history.csv, plan.json, distribution.csv under out_dir.
void emit_report(std::span<const HistoryRow> history, const NetworkPlan& plan, const MixedPrecNet& net,
                 std::span<const LayerStrengths> strengths, const std::filesystem::path& out_dir);

std::vector<std::string> quantized_layer_names(const MixedPrecNet& net);

} // namespace mixbit
