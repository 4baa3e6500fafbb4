// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "error.hpp"

namespace mixbit {

struct ConvGeometry {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t stride = 1;
    std::size_t pad = 0;

    std::size_t out_h() const { return (height + 2 * pad - kernel_h) / stride + 1; }
    std::size_t out_w() const { return (width + 2 * pad - kernel_w) / stride + 1; }
    // Rows of the lowered matrix: C*kH*kW.
    std::size_t patch_size() const { return channels * kernel_h * kernel_w; }
    // Columns of the lowered matrix: one per output position.
    std::size_t positions() const { return out_h() * out_w(); }

    void validate() const
    {
        require(stride >= 1, ErrorKind::InvalidArgument, "conv stride must be >= 1");
        require(kernel_h >= 1 && kernel_w >= 1, ErrorKind::InvalidArgument, "conv kernel extents must be >= 1");
        require(height + 2 * pad >= kernel_h && width + 2 * pad >= kernel_w, ErrorKind::InvalidArgument,
                "conv kernel larger than padded input");
    }
};

// Lowers one CHW image to a (C*kH*kW) x (OH*OW) row-major matrix. Column j is
// the receptive field of output position j; out-of-range taps read zero.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* out)
{
    const std::size_t oh = g.out_h(), ow = g.out_w();
    const std::size_t npos = oh * ow;
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        const T* plane = image + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++row) {
                T* dst = out + row * npos;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                        const bool inside = iy >= 0 && iy < static_cast<long>(g.height) && ix >= 0
                                            && ix < static_cast<long>(g.width);
                        dst[oy * ow + ox] = inside ? plane[iy * static_cast<long>(g.width) + ix] : T{};
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatters-adds a lowered matrix back into a CHW image.
template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* image)
{
    const std::size_t oh = g.out_h(), ow = g.out_w();
    const std::size_t npos = oh * ow;
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        T* plane = image + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++row) {
                const T* src = cols + row * npos;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                    if (iy < 0 || iy >= static_cast<long>(g.height))
                        continue;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                        if (ix < 0 || ix >= static_cast<long>(g.width))
                            continue;
                        plane[iy * static_cast<long>(g.width) + ix] += src[oy * ow + ox];
                    }
                }
            }
        }
    }
}

} // namespace mixbit
