// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bd/bdmodel.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "error.hpp"
#include "numerics/parallel.hpp"
#include "quant/quantizer.hpp"

namespace mixbit {

static_assert(std::endian::native == std::endian::little, "BD files are written in host order");

namespace {

constexpr char kMagic[4] = {'M', 'B', 'B', 'D'};
constexpr std::uint16_t kVersion = 1;

} // namespace

BDLayer make_bd_layer(const Tensor& quantized_weight, int weight_bits, int act_bits, double alpha, std::size_t stride,
                      std::size_t pad, std::vector<double> bn_scale, std::vector<double> bn_shift)
{
    require(quantized_weight.rank() == 4, ErrorKind::InvalidArgument, "BD layer weight must be OIHW");
    require(weight_bits >= 1 && weight_bits <= 16 && act_bits >= 1 && act_bits <= 16, ErrorKind::InvalidArgument,
            "BD layer bitwidths must lie in [1,16]");
    BDLayer l;
    l.out_channels = static_cast<std::uint16_t>(quantized_weight.dim(0));
    l.in_channels = static_cast<std::uint16_t>(quantized_weight.dim(1));
    l.kernel_h = static_cast<std::uint16_t>(quantized_weight.dim(2));
    l.kernel_w = static_cast<std::uint16_t>(quantized_weight.dim(3));
    l.stride = static_cast<std::uint16_t>(stride);
    l.pad = static_cast<std::uint16_t>(pad);
    l.weight_bits = static_cast<std::uint16_t>(weight_bits);
    l.act_bits = static_cast<std::uint16_t>(act_bits);
    l.alpha = alpha;
    require(bn_scale.size() == l.out_channels && bn_shift.size() == l.out_channels, ErrorKind::InvalidArgument,
            "BD layer BN vectors must have one entry per output channel");
    l.bn_scale = std::move(bn_scale);
    l.bn_shift = std::move(bn_shift);
    CodeMatrix codes(l.out_channels, l.patch_size());
    codes.data = to_codes(quantized_weight.data(), weight_bits, true);
    l.planes = decompose_bits(codes, weight_bits);
    return l;
}

Tensor bd_conv2d(const BDLayer& layer, const Tensor& input, BDCounters* counters)
{
    require(input.rank() == 4 && input.dim(1) == layer.in_channels, ErrorKind::InvalidArgument,
            "bd_conv2d: input " + shape_str(input.shape()) + " does not match " + std::to_string(layer.in_channels)
                + " input channels");
    ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), layer.kernel_h, layer.kernel_w, layer.stride, layer.pad};
    g.validate();
    const std::size_t n_img = input.dim(0), co = layer.out_channels, s = g.patch_size(), npos = g.positions();
    Tensor out({n_img, co, g.out_h(), g.out_w()});
    const std::size_t in_stride = g.channels * g.height * g.width;

    if (!layer.quantized()) {
        require(layer.float_weights.size() == co * s, ErrorKind::Format, "float BD layer has wrong weight count");
        for (std::size_t b = 0; b < n_img; ++b) {
            std::vector<double> cols(s * npos);
            im2col(input.ptr() + b * in_stride, g, cols.data());
            parallel_for(co, [&](std::size_t o) {
                double* dst = out.ptr() + (b * co + o) * npos;
                const double* w = layer.float_weights.data() + o * s;
                for (std::size_t j = 0; j < npos; ++j) {
                    double acc = 0.0;
                    for (std::size_t r = 0; r < s; ++r)
                        acc += w[r] * cols[r * npos + j];
                    dst[j] = layer.bn_scale[o] * acc + layer.bn_shift[o];
                }
            });
        }
        return out;
    }

    require(layer.alpha > 0.0, ErrorKind::InvalidArgument, "bd_conv2d: layer alpha must be positive");
    const int K = layer.act_bits, M = layer.weight_bits;
    const double ws = layer.weight_scale(), xs = layer.act_scale();
    // Activation codes of the whole image, then lowered with zero padding (code 0 is value 0).
    std::vector<std::uint32_t> img_codes(in_stride);
    CodeMatrix cols(s, npos);
    for (std::size_t b = 0; b < n_img; ++b) {
        const double* src = input.ptr() + b * in_stride;
        for (std::size_t k = 0; k < in_stride; ++k)
            img_codes[k] = grid_code(std::clamp(src[k], 0.0, layer.alpha) / layer.alpha, K);
        im2col(img_codes.data(), g, cols.data.data());
        const CodeMatrix cols_t = cols.transposed();
        std::vector<std::int64_t> colsum(npos, 0);
        for (std::size_t j = 0; j < npos; ++j)
            for (std::size_t r = 0; r < s; ++r)
                colsum[j] += cols_t.at(j, r);
        const BitPlaneMatrix bx = decompose_bits(cols_t, K);
        const IntMatrix o = recombine(binary_gemm(layer.planes, bx), M, K);
        if (counters) {
            counters->and_word_ops += and_word_ops(layer.planes, bx);
            counters->shift_adds += shift_add_ops(co, npos, M, K);
        }
        for (std::size_t c = 0; c < co; ++c) {
            double* dst = out.ptr() + (b * co + c) * npos;
            for (std::size_t j = 0; j < npos; ++j) {
                const double v = ws * xs * static_cast<double>(o.at(c, j)) - xs * static_cast<double>(colsum[j]);
                dst[j] = layer.bn_scale[c] * v + layer.bn_shift[c];
            }
        }
    }
    return out;
}

BDModel export_bd_model(const MixedPrecNet& net)
{
    require(net.mode() == NetMode::Fixed && net.plan().has_value(), ErrorKind::State,
            "BD export needs a network in fixed-plan mode");
    require(net.bn_frozen(), ErrorKind::State, "BD export needs frozen BN statistics (retrain first)");
    const auto& program = net.layers();
    const auto& plan = *net.plan();
    BDModel model;
    std::size_t i = 0;
    auto expect = [&](LayerKind kind) {
        require(i < program.size() && program[i].kind == kind, ErrorKind::State,
                std::string("BD export supports conv-bn-relu chains, avgpool and a final dense layer; found ")
                    + (i < program.size() ? layer_kind_name(program[i].kind) : "end") + " where "
                    + layer_kind_name(kind) + " was expected");
        return program[i++];
    };
    while (i < program.size() && program[i].kind == LayerKind::Conv) {
        const auto& conv = net.convs()[static_cast<std::size_t>(expect(LayerKind::Conv).unit)];
        const auto& bn = net.bns()[static_cast<std::size_t>(expect(LayerKind::BatchNorm).unit)];
        expect(LayerKind::Relu);
        std::vector<double> scale(conv.out_channels), shift(conv.out_channels);
        for (std::size_t c = 0; c < conv.out_channels; ++c) {
            scale[c] = bn.gamma.value[c] / std::sqrt(bn.state.running_var[c] + 1e-5);
            shift[c] = bn.beta.value[c] - bn.state.running_mean[c] * scale[c];
        }
        if (conv.quantize) {
            const auto& lb = plan.layers.at(static_cast<std::size_t>(conv.qindex));
            require(lb.weight_bits != kBypassBits && lb.act_bits != kBypassBits, ErrorKind::State,
                    "BD export cannot lower bypassed layer " + conv.name);
            model.layers.push_back(make_bd_layer(quantize_weights(conv.weight.value, lb.weight_bits), lb.weight_bits,
                                                 lb.act_bits,
                                                 net.sites()[static_cast<std::size_t>(conv.qindex)].alpha.value[0],
                                                 conv.stride, conv.pad, std::move(scale), std::move(shift)));
        } else {
            BDLayer l;
            l.out_channels = static_cast<std::uint16_t>(conv.out_channels);
            l.in_channels = static_cast<std::uint16_t>(conv.in_channels);
            l.kernel_h = l.kernel_w = static_cast<std::uint16_t>(conv.kernel);
            l.stride = static_cast<std::uint16_t>(conv.stride);
            l.pad = static_cast<std::uint16_t>(conv.pad);
            l.bn_scale = std::move(scale);
            l.bn_shift = std::move(shift);
            auto w = conv.weight.value.data();
            l.float_weights.assign(w.begin(), w.end());
            model.layers.push_back(std::move(l));
        }
    }
    expect(LayerKind::AvgPool);
    const auto& fc = net.denses()[static_cast<std::size_t>(expect(LayerKind::Dense).unit)];
    require(i == program.size(), ErrorKind::State, "BD export: layers after the classifier are not supported");
    BDLayer l;
    l.out_channels = static_cast<std::uint16_t>(fc.weight.value.dim(0));
    l.in_channels = static_cast<std::uint16_t>(fc.weight.value.dim(1));
    l.kernel_h = l.kernel_w = 1;
    l.bn_scale.assign(l.out_channels, 1.0);
    auto bias = fc.bias.value.data();
    l.bn_shift.assign(bias.begin(), bias.end());
    auto w = fc.weight.value.data();
    l.float_weights.assign(w.begin(), w.end());
    model.layers.push_back(std::move(l));
    return model;
}

Tensor bd_infer(const BDModel& model, const Tensor& images, BDCounters* counters)
{
    require(model.layers.size() >= 1, ErrorKind::InvalidArgument, "BD model has no layers");
    Tensor x = images;
    for (std::size_t li = 0; li + 1 < model.layers.size(); ++li) {
        x = bd_conv2d(model.layers[li], x, counters);
        for (auto& v : x.data())
            v = std::max(v, 0.0);
    }
    const Tensor pooled = global_avg_pool_forward(x);
    const Tensor logits = bd_conv2d(model.layers.back(), pooled.reshaped({pooled.dim(0), pooled.dim(1), 1, 1}), counters);
    return logits.reshaped({logits.dim(0), logits.dim(1)});
}

namespace {

template <typename T>
void put(std::ofstream& out, const T& v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void put_array(std::ofstream& out, const std::vector<T>& v)
{
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
T get(std::ifstream& in, const std::string& what)
{
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    require(in.gcount() == sizeof(T), ErrorKind::Format, "truncated BD file while reading " + what);
    return v;
}

template <typename T>
std::vector<T> get_array(std::ifstream& in, std::size_t n, const std::string& what)
{
    std::vector<T> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    require(in.gcount() == static_cast<std::streamsize>(n * sizeof(T)), ErrorKind::Format,
            "truncated BD file while reading " + what);
    return v;
}

} // namespace

void write_bd_model(const BDModel& model, const std::filesystem::path& path)
{
    require(model.layers.size() <= 0xffff, ErrorKind::InvalidArgument, "too many layers for the BD format");
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint16_t>(model.layers.size()));
    for (const auto& l : model.layers) {
        for (std::uint16_t v : {l.out_channels, l.in_channels, l.kernel_h, l.kernel_w, l.stride, l.pad, l.weight_bits,
                                l.act_bits})
            put(out, v);
        put(out, l.alpha);
        put_array(out, l.bn_scale);
        put_array(out, l.bn_shift);
        if (l.quantized())
            put_array(out, l.planes.packed);
        else
            put_array(out, l.float_weights);
    }
    require(out.good(), ErrorKind::Io, "write failed for " + path.string());
}

BDModel read_bd_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Io, "cannot open BD model " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    require(in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0, ErrorKind::Format,
            path.string() + " is not a BD model (bad magic)");
    const auto version = get<std::uint16_t>(in, "version");
    require(version == kVersion, ErrorKind::Format, "unsupported BD version " + std::to_string(version));
    const auto count = get<std::uint16_t>(in, "layer count");
    BDModel model;
    for (std::size_t i = 0; i < count; ++i) {
        BDLayer l;
        const std::string at = "layer " + std::to_string(i);
        l.out_channels = get<std::uint16_t>(in, at);
        l.in_channels = get<std::uint16_t>(in, at);
        l.kernel_h = get<std::uint16_t>(in, at);
        l.kernel_w = get<std::uint16_t>(in, at);
        l.stride = get<std::uint16_t>(in, at);
        l.pad = get<std::uint16_t>(in, at);
        l.weight_bits = get<std::uint16_t>(in, at);
        l.act_bits = get<std::uint16_t>(in, at);
        require(l.weight_bits <= 16 && l.act_bits <= 16 && (l.weight_bits == 0) == (l.act_bits == 0),
                ErrorKind::Format, at + ": invalid bitwidths");
        require(l.stride >= 1 && l.kernel_h >= 1 && l.kernel_w >= 1 && l.out_channels >= 1 && l.in_channels >= 1,
                ErrorKind::Format, at + ": invalid geometry");
        l.alpha = get<double>(in, at + " alpha");
        l.bn_scale = get_array<double>(in, l.out_channels, at + " BN scale");
        l.bn_shift = get_array<double>(in, l.out_channels, at + " BN shift");
        if (l.quantized()) {
            l.planes.logical_rows = l.out_channels;
            l.planes.logical_cols = l.patch_size();
            l.planes.bits = l.weight_bits;
            l.planes.words_per_row = words_for(l.patch_size());
            l.planes.packed = get_array<std::uint64_t>(in, l.planes.plane_rows() * l.planes.words_per_row,
                                                       at + " planes");
        } else {
            l.float_weights = get_array<double>(in, std::size_t{l.out_channels} * l.patch_size(), at + " weights");
        }
        model.layers.push_back(std::move(l));
    }
    in.peek();
    require(in.eof(), ErrorKind::Format, path.string() + ": trailing bytes after the last layer");
    return model;
}

KernelBench bench_kernel(std::size_t c_in, std::size_t c_out, std::size_t kernel, std::size_t out_hw, int weight_bits,
                         int act_bits, std::size_t reps, std::uint64_t seed)
{
    require(reps >= 10, ErrorKind::InvalidArgument, "bench_kernel needs at least 10 repetitions");
    require(c_in > 0 && c_out > 0 && kernel > 0 && out_hw > 0, ErrorKind::InvalidArgument,
            "bench_kernel dimensions must be positive");
    require(weight_bits >= 1 && weight_bits <= 16 && act_bits >= 1 && act_bits <= 16, ErrorKind::InvalidArgument,
            "bench_kernel bitwidths must lie in [1, 16]");
    const std::size_t s = c_in * kernel * kernel, n = out_hw * out_hw;
    Rng rng(seed);
    std::uniform_int_distribution<std::uint32_t> wcode(0, (1u << weight_bits) - 1), xcode(0, (1u << act_bits) - 1);
    CodeMatrix w(c_out, s), xt(n, s);
    for (auto& v : w.data)
        v = wcode(rng);
    for (auto& v : xt.data)
        v = xcode(rng);
    const BitPlaneMatrix bw = decompose_bits(w, weight_bits);
    const BitPlaneMatrix bx = decompose_bits(xt, act_bits);
    std::vector<double> times;
    std::int64_t sink = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const IntMatrix o = recombine(binary_gemm(bw, bx), weight_bits, act_bits);
        const auto t1 = std::chrono::steady_clock::now();
        sink += o.data[r % o.data.size()];
        times.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
    }
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
    KernelBench kb;
    kb.median_ns = times[times.size() / 2] + (sink == -1 ? 1.0 : 0.0);
    kb.and_word_ops = and_word_ops(bw, bx);
    kb.shift_adds = shift_add_ops(c_out, n, weight_bits, act_bits);
    return kb;
}

} // namespace mixbit
