// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "net/network.hpp"

namespace mixbit {

// A checkpoint is a JSON manifest plus a sibling ".bin" blob of little-endian
// f64 values. The manifest records architecture, bitwidth set, mode, plan,
// alpha and strength values, and an offset table into the blob.
void save_checkpoint(const MixedPrecNet& net, const std::filesystem::path& manifest_path);
MixedPrecNet load_checkpoint(const std::filesystem::path& manifest_path);

// Copies weights, BN parameters and statistics from `src` into `dst` by name.
// Both nets must share an architecture; bitwidth sets may differ.
void copy_weights(const MixedPrecNet& src, MixedPrecNet& dst);

std::filesystem::path blob_path_for(const std::filesystem::path& manifest_path);

} // namespace mixbit
