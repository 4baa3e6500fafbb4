// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "numerics/im2col.hpp"
#include "numerics/tensor.hpp"

namespace mixbit {

// Row-major matrix of unsigned fixed-point codes.
struct CodeMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint32_t> data;

    CodeMatrix() = default;
    CodeMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}
    std::uint32_t& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    std::uint32_t at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    CodeMatrix transposed() const;
};

// Bit planes of a CodeMatrix, packed 64 entries per word along the columns.
// Source row r expands to plane rows r*bits + m, least significant plane first.
struct BitPlaneMatrix {
    std::size_t logical_rows = 0;
    std::size_t logical_cols = 0;
    int bits = 0;
    std::size_t words_per_row = 0;
    std::vector<std::uint64_t> packed;

    std::size_t plane_rows() const noexcept { return logical_rows * static_cast<std::size_t>(bits); }
    const std::uint64_t* row(std::size_t plane_row) const { return packed.data() + plane_row * words_per_row; }
    bool bit(std::size_t plane_row, std::size_t col) const
    {
        return (row(plane_row)[col / 64] >> (col % 64)) & 1u;
    }
};

inline std::size_t words_for(std::size_t n) { return (n + 63) / 64; }

// One image of an NCHW tensor lowered to an s x n matrix (s = C*kH*kW).
Tensor im2col_matrix(const Tensor& input, std::size_t image, std::size_t kernel_h, std::size_t kernel_w,
                     std::size_t stride, std::size_t pad);

// Maps on-grid values to integer codes. Weights (signed grid in [-1,1]) use
// (w+1)(2^b-1)/2; activations use x(2^b-1)/alpha.
std::vector<std::uint32_t> to_codes(std::span<const double> values, int bits, bool is_signed, double alpha = 1.0);

BitPlaneMatrix decompose_bits(const CodeMatrix& codes, int bits);
CodeMatrix compose_bits(const BitPlaneMatrix& planes);

std::uint32_t popcount_native(std::uint64_t x);
std::uint32_t popcount_table(std::uint64_t x);

// P[i][j] = popcount(row_i(lhs) AND row_j(rhs)). Both operands are packed
// along the shared inner extent, so rhs holds the columns of B_x.
struct PopcountMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint32_t> data;
};

PopcountMatrix binary_gemm(const BitPlaneMatrix& lhs, const BitPlaneMatrix& rhs);
// Same product using the table popcount; used to cross-check the native path.
PopcountMatrix binary_gemm_table(const BitPlaneMatrix& lhs, const BitPlaneMatrix& rhs);

// Word-level AND operations issued by binary_gemm for these operands.
std::uint64_t and_word_ops(const BitPlaneMatrix& lhs, const BitPlaneMatrix& rhs);

struct IntMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int64_t> data;
    std::int64_t at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// O[i][j] = sum over m<M, k<K of P[iM+m][jK+k] << (m+k).
IntMatrix recombine(const PopcountMatrix& p, int weight_bits, int act_bits);

std::uint64_t shift_add_ops(std::size_t out_rows, std::size_t out_cols, int weight_bits, int act_bits);

// Full integer core: weight codes (c_o x s) times activation codes (s x n).
IntMatrix bd_matmul(const CodeMatrix& weight_codes, int weight_bits, const CodeMatrix& act_codes, int act_bits);

} // namespace mixbit
