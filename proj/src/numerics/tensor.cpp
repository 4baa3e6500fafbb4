// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "numerics/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace mixbit {

std::size_t shape_size(const Shape& shape)
{
    std::size_t n = 1;
    for (auto e : shape)
        n *= e;
    return n;
}

std::string shape_str(const Shape& shape)
{
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i)
            s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill)
{
    for (auto e : shape_)
        require(e > 0, ErrorKind::InvalidArgument, "tensor extents must be positive, got " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values))
{
    for (auto e : shape_)
        if (e == 0)
            fail(ErrorKind::InvalidArgument, "tensor extents must be positive, got " + shape_str(shape_));
    if (data_.size() != shape_size(shape_))
        fail(ErrorKind::InvalidArgument,
             "tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
}

bool Tensor::all_finite() const noexcept
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const
{
    require(shape_size(shape) == data_.size(), ErrorKind::InvalidArgument,
            "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
}

void Tensor::check_finite(const char* where) const
{
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i]))
            fail(ErrorKind::Numeric, std::string("non-finite value in ") + where + " at flat index " + std::to_string(i));
    }
}

Tensor randn(const Shape& shape, double stddev, Rng& rng)
{
    Tensor t(shape);
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.data())
        v = dist(rng);
    return t;
}

Tensor uniform(const Shape& shape, double lo, double hi, Rng& rng)
{
    Tensor t(shape);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data())
        v = dist(rng);
    return t;
}

} // namespace mixbit
