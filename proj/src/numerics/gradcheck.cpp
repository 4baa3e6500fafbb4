// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mixbit {

namespace {

double evaluate(const ScalarFn& fn)
{
    Tape tape;
    return fn(tape).value()[0];
}

} // namespace

double finite_diff_check(const ScalarFn& fn, Param& param, double h, std::size_t max_coords, std::uint64_t seed)
{
    param.zero_grad();
    {
        Tape tape;
        Var loss = fn(tape);
        tape.backward(loss);
    }
    const Tensor analytic = param.grad;

    std::vector<std::size_t> coords(param.value.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > max_coords) {
        Rng rng(seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(max_coords);
    }

    double worst = 0.0;
    for (auto i : coords) {
        const double saved = param.value[i];
        param.value[i] = saved + h;
        const double up = evaluate(fn);
        param.value[i] = saved - h;
        const double down = evaluate(fn);
        param.value[i] = saved;
        const double central = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(analytic[i] - central) / (std::abs(central) + 1e-8));
    }
    param.zero_grad();
    return worst;
}

} // namespace mixbit
