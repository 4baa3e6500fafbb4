// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "run/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "net/checkpoint.hpp"
#include "numerics/gradcheck.hpp"
#include "quant/quantizer.hpp"
#include "run/report.hpp"

namespace mixbit {

SearchStageResult search_stage(MixedPrecNet& net, const Dataset& data, const RunConfig& config,
                               const std::optional<std::filesystem::path>& out_dir)
{
    SearchStageResult r;
    const SearchConfig sc = effective_search_config(config, net);
    r.target_mflops = sc.target_mflops;
    r.search = run_search(net, data, sc);
    net.set_strengths(r.search.best_strengths);
    r.plan_mflops = network_flops(r.search.plan, net.layer_costs()) / kMega;
    if (out_dir) {
        emit_report(r.search.history, r.search.plan, net, r.search.best_strengths, *out_dir);
        write_manifest(config, "search", *out_dir / "manifest.json");
        save_checkpoint(net, *out_dir / "search.json");
    }
    return r;
}

NetworkPlan parse_plan_spec(const std::string& spec, std::size_t quantized_layers)
{
    const std::string prefix = "uniform:";
    NetworkPlan plan;
    if (spec.rfind(prefix, 0) == 0) {
        int b = 0;
        try {
            std::size_t used = 0;
            b = std::stoi(spec.substr(prefix.size()), &used);
            require(used == spec.size() - prefix.size(), ErrorKind::Config, "");
        } catch (const std::exception&) {
            fail(ErrorKind::Config, "bad plan spec '" + spec + "' (expected uniform:N)");
        }
        require(b == kBypassBits || (b >= 1 && b <= 16), ErrorKind::Config,
                "uniform bitwidth must be in [1,16] or 32 (bypass)");
        plan = NetworkPlan::uniform(quantized_layers, b);
    } else {
        plan = read_plan_json(spec);
    }
    require(plan.layers.size() == quantized_layers, ErrorKind::Config,
            "plan has " + std::to_string(plan.layers.size()) + " layers, network has "
                + std::to_string(quantized_layers));
    return plan;
}

namespace {

// True when x sits at least `margin` (in normalized units) from every rounding
// threshold and from the clip points for all bitwidths.
bool boundary_safe(double x, double alpha, std::span<const int> bits, double margin)
{
    if (std::abs(x - alpha) < margin * alpha || std::abs(x) < margin * alpha)
        return false;
    if (x <= 0.0 || x >= alpha)
        return true;
    const double t = x / alpha;
    for (int b : bits) {
        const double levels = grid_levels(b);
        const double frac = t * levels - std::floor(t * levels);
        if (std::abs(frac - 0.5) < margin * levels)
            return false;
    }
    return true;
}

struct LayerProbe {
    Tensor x;
    Tensor head;
    Param w, alpha, r, s;
    std::vector<double> noise_r, noise_s;
    double tau = 0.7;
    bool stochastic = false;
    BitwidthSet bits;

    Var loss(Tape& tape) const
    {
        auto& self = const_cast<LayerProbe&>(*this);
        Var rv = tape.param(self.r), sv = tape.param(self.s);
        Var cw = stochastic ? gumbel_softmax_var(rv, noise_r, tau) : softmax_var(rv);
        Var cx = stochastic ? gumbel_softmax_var(sv, noise_s, tau) : softmax_var(sv);
        Var xq = quantize_activations_mixed(tape.constant(x), tape.param(self.alpha), cx, bits.bits());
        Var wq = quantize_weights_mixed(tape.param(self.w), cw, bits.bits());
        return dot_const(conv2d(xq, wq, 1, 1), head);
    }
};

LayerProbe make_probe(Rng& rng, bool stochastic)
{
    LayerProbe p;
    p.stochastic = stochastic;
    std::uniform_real_distribution<double> ua(0.5, 2.0);
    const double alpha = ua(rng);
    std::uniform_real_distribution<double> ux(-0.3 * alpha, 1.3 * alpha);
    p.x = Tensor({2, 3, 5, 5});
    for (auto& v : p.x.data()) {
        do
            v = ux(rng);
        while (!boundary_safe(v, alpha, p.bits.bits(), 1e-3));
    }
    p.w = Param("w", randn({4, 3, 3, 3}, 0.5, rng));
    p.alpha = Param("alpha", Tensor({1}, alpha));
    p.r = Param("r", randn({p.bits.size()}, 1.0, rng));
    p.s = Param("s", randn({p.bits.size()}, 1.0, rng));
    p.head = randn({2, 4, 5, 5}, 1.0, rng);
    p.noise_r = gumbel_noise(p.bits.size(), rng);
    p.noise_s = gumbel_noise(p.bits.size(), rng);
    return p;
}

} // namespace

GradcheckReport gradient_check(std::uint64_t seed, bool stochastic, std::size_t coords)
{
    GradcheckReport rep;
    Rng rng(seed);
    const std::size_t nb = BitwidthSet().size();
    const std::size_t strength_points = (coords + nb - 1) / nb;
    for (std::size_t i = 0; i < strength_points; ++i) {
        LayerProbe p = make_probe(rng, stochastic);
        const ScalarFn fn = [&p](Tape& t) { return p.loss(t); };
        rep.r_error = std::max(rep.r_error, finite_diff_check(fn, p.r, 1e-3));
        rep.s_error = std::max(rep.s_error, finite_diff_check(fn, p.s, 1e-3));
        rep.r_coords += nb;
        rep.s_coords += nb;
    }
    for (std::size_t i = 0; i < coords; ++i) {
        LayerProbe p = make_probe(rng, stochastic);
        const ScalarFn fn = [&p](Tape& t) { return p.loss(t); };
        rep.alpha_error = std::max(rep.alpha_error, finite_diff_check(fn, p.alpha, 1e-6));
        ++rep.alpha_coords;
    }
    return rep;
}

std::vector<std::int32_t> argmax_rows(const Tensor& logits)
{
    require(logits.rank() == 2, ErrorKind::InvalidArgument, "argmax_rows expects a matrix");
    std::vector<std::int32_t> out;
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < logits.dim(0); ++i) {
        const double* row = logits.ptr() + i * k;
        out.push_back(static_cast<std::int32_t>(std::max_element(row, row + k) - row));
    }
    return out;
}

Tensor bd_infer_split(const BDModel& model, const Dataset& data, const std::string& split, std::size_t batch_size)
{
    const auto& idx = data.split(split);
    require(!idx.empty(), ErrorKind::InvalidArgument, "split '" + split + "' is empty");
    std::vector<double> all;
    std::size_t classes = 0;
    for (std::size_t lo = 0; lo < idx.size(); lo += batch_size) {
        const std::size_t hi = std::min(idx.size(), lo + batch_size);
        const Batch b = make_batch(data, std::span<const std::size_t>(idx).subspan(lo, hi - lo));
        const Tensor logits = bd_infer(model, b.images);
        classes = logits.dim(1);
        all.insert(all.end(), logits.data().begin(), logits.data().end());
    }
    return Tensor({idx.size(), classes}, std::move(all));
}

} // namespace mixbit
