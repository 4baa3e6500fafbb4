// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>

#include "numerics/tape.hpp"

namespace mixbit {

// Builds a scalar on the given tape. Must bind the checked Param via tape.param().
using ScalarFn = std::function<Var(Tape&)>;

// max over sampled coordinates of |analytic - central| / (|central| + 1e-8).
// At most max_coords coordinates are checked, drawn without replacement.
double finite_diff_check(const ScalarFn& fn, Param& param, double h, std::size_t max_coords = 100,
                         std::uint64_t seed = 0);

} // namespace mixbit
