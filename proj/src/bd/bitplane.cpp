// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bd/bitplane.hpp"

#include <array>
#include <bit>
#include <cmath>

#include "error.hpp"
#include "numerics/parallel.hpp"

namespace mixbit {

CodeMatrix CodeMatrix::transposed() const
{
    CodeMatrix t(cols, rows);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            t.at(c, r) = at(r, c);
    return t;
}

Tensor im2col_matrix(const Tensor& input, std::size_t image, std::size_t kernel_h, std::size_t kernel_w,
                     std::size_t stride, std::size_t pad)
{
    require(input.rank() == 4, ErrorKind::InvalidArgument, "im2col expects an NCHW tensor");
    require(image < input.dim(0), ErrorKind::InvalidArgument, "im2col image index out of range");
    ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), kernel_h, kernel_w, stride, pad};
    g.validate();
    Tensor out({g.patch_size(), g.positions()});
    im2col(input.ptr() + image * g.channels * g.height * g.width, g, out.ptr());
    return out;
}

std::vector<std::uint32_t> to_codes(std::span<const double> values, int bits, bool is_signed, double alpha)
{
    require(bits >= 1 && bits <= 16, ErrorKind::InvalidArgument, "to_codes: bitwidth outside [1,16]");
    require(alpha > 0.0, ErrorKind::InvalidArgument, "to_codes: alpha must be positive");
    const double levels = static_cast<double>((1u << bits) - 1);
    std::vector<std::uint32_t> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = is_signed ? (values[i] + 1.0) * levels / 2.0 : values[i] * levels / alpha;
        const double r = std::round(v);
        if (!(std::abs(v - r) <= 1e-6 * std::max(1.0, levels) && r >= 0.0 && r <= levels))
            fail(ErrorKind::InvalidArgument,
                 "to_codes: value " + std::to_string(values[i]) + " is not on the " + std::to_string(bits) + "-bit grid");
        out[i] = static_cast<std::uint32_t>(r);
    }
    return out;
}

BitPlaneMatrix decompose_bits(const CodeMatrix& codes, int bits)
{
    require(bits >= 1 && bits <= 16, ErrorKind::InvalidArgument, "decompose_bits: bitwidth outside [1,16]");
    BitPlaneMatrix bp;
    bp.logical_rows = codes.rows;
    bp.logical_cols = codes.cols;
    bp.bits = bits;
    bp.words_per_row = words_for(codes.cols);
    bp.packed.assign(bp.plane_rows() * bp.words_per_row, 0);
    const std::uint32_t limit = 1u << bits;
    for (std::size_t r = 0; r < codes.rows; ++r)
        for (std::size_t c = 0; c < codes.cols; ++c) {
            const std::uint32_t v = codes.at(r, c);
            if (v >= limit)
                fail(ErrorKind::InvalidArgument,
                     "decompose_bits: code " + std::to_string(v) + " does not fit in " + std::to_string(bits) + " bits");
            for (int m = 0; m < bits; ++m)
                if ((v >> m) & 1u)
                    bp.packed[(r * static_cast<std::size_t>(bits) + static_cast<std::size_t>(m)) * bp.words_per_row
                              + c / 64]
                        |= std::uint64_t{1} << (c % 64);
        }
    return bp;
}

CodeMatrix compose_bits(const BitPlaneMatrix& planes)
{
    CodeMatrix out(planes.logical_rows, planes.logical_cols);
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c) {
            std::uint32_t v = 0;
            for (int m = 0; m < planes.bits; ++m)
                v |= static_cast<std::uint32_t>(planes.bit(r * static_cast<std::size_t>(planes.bits) + m, c)) << m;
            out.at(r, c) = v;
        }
    return out;
}

std::uint32_t popcount_native(std::uint64_t x) { return static_cast<std::uint32_t>(std::popcount(x)); }

std::uint32_t popcount_table(std::uint64_t x)
{
    static constexpr std::array<std::uint8_t, 16> nibble = {0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4};
    std::uint32_t n = 0;
    for (; x; x >>= 4)
        n += nibble[x & 0xf];
    return n;
}

namespace {

template <std::uint32_t (*Popcount)(std::uint64_t)>
PopcountMatrix gemm_impl(const BitPlaneMatrix& lhs, const BitPlaneMatrix& rhs)
{
    require(lhs.logical_cols == rhs.logical_cols, ErrorKind::InvalidArgument,
            "binary_gemm: inner extents differ (" + std::to_string(lhs.logical_cols) + " vs "
                + std::to_string(rhs.logical_cols) + ")");
    PopcountMatrix p;
    p.rows = lhs.plane_rows();
    p.cols = rhs.plane_rows();
    p.data.assign(p.rows * p.cols, 0);
    const std::size_t words = lhs.words_per_row;
    parallel_for(p.rows, [&](std::size_t i) {
        const std::uint64_t* a = lhs.row(i);
        std::uint32_t* out = p.data.data() + i * p.cols;
        for (std::size_t j = 0; j < p.cols; ++j) {
            const std::uint64_t* b = rhs.row(j);
            std::uint32_t acc = 0;
            for (std::size_t w = 0; w < words; ++w)
                acc += Popcount(a[w] & b[w]);
            out[j] = acc;
        }
    });
    return p;
}

} // namespace

PopcountMatrix binary_gemm(const BitPlaneMatrix& lhs, const BitPlaneMatrix& rhs)
{
#ifdef MIXBIT_PORTABLE_POPCOUNT
    return gemm_impl<popcount_table>(lhs, rhs);
#else
    return gemm_impl<popcount_native>(lhs, rhs);
#endif
}

PopcountMatrix binary_gemm_table(const BitPlaneMatrix& lhs, const BitPlaneMatrix& rhs)
{
    return gemm_impl<popcount_table>(lhs, rhs);
}

std::uint64_t and_word_ops(const BitPlaneMatrix& lhs, const BitPlaneMatrix& rhs)
{
    return static_cast<std::uint64_t>(lhs.words_per_row) * lhs.plane_rows() * rhs.plane_rows();
}

IntMatrix recombine(const PopcountMatrix& p, int weight_bits, int act_bits)
{
    require(weight_bits >= 1 && act_bits >= 1, ErrorKind::InvalidArgument, "recombine: bitwidths must be >= 1");
    const auto M = static_cast<std::size_t>(weight_bits), K = static_cast<std::size_t>(act_bits);
    require(p.rows % M == 0 && p.cols % K == 0, ErrorKind::InvalidArgument,
            "recombine: " + std::to_string(p.rows) + "x" + std::to_string(p.cols) + " is not divisible by ("
                + std::to_string(M) + "," + std::to_string(K) + ")");
    IntMatrix o;
    o.rows = p.rows / M;
    o.cols = p.cols / K;
    o.data.assign(o.rows * o.cols, 0);
    for (std::size_t i = 0; i < o.rows; ++i)
        for (std::size_t m = 0; m < M; ++m) {
            const std::uint32_t* prow = p.data.data() + (i * M + m) * p.cols;
            std::int64_t* orow = o.data.data() + i * o.cols;
            for (std::size_t j = 0; j < o.cols; ++j) {
                const std::uint32_t* cell = prow + j * K;
                std::int64_t acc = 0;
                for (std::size_t k = 0; k < K; ++k)
                    acc += static_cast<std::int64_t>(cell[k]) << k;
                orow[j] += acc << m;
            }
        }
    return o;
}

std::uint64_t shift_add_ops(std::size_t out_rows, std::size_t out_cols, int weight_bits, int act_bits)
{
    return static_cast<std::uint64_t>(out_rows) * out_cols * static_cast<std::uint64_t>(weight_bits)
           * static_cast<std::uint64_t>(act_bits);
}

IntMatrix bd_matmul(const CodeMatrix& weight_codes, int weight_bits, const CodeMatrix& act_codes, int act_bits)
{
    require(weight_codes.cols == act_codes.rows, ErrorKind::InvalidArgument, "bd_matmul: inner extents differ");
    const BitPlaneMatrix bw = decompose_bits(weight_codes, weight_bits);
    const BitPlaneMatrix bx = decompose_bits(act_codes.transposed(), act_bits);
    return recombine(binary_gemm(bw, bx), weight_bits, act_bits);
}

} // namespace mixbit
