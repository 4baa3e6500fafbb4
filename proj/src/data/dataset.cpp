// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "error.hpp"

namespace mixbit {

const std::vector<std::size_t>& Dataset::split(const std::string& name) const
{
    auto it = splits.find(name);
    require(it != splits.end(), ErrorKind::InvalidArgument, "dataset has no split named '" + name + "'");
    return it->second;
}

void read_cifar_file(const std::filesystem::path& path, std::vector<float>& images, std::vector<std::int32_t>& labels)
{
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    require(!ec, ErrorKind::Io, "cannot stat " + path.string() + ": " + ec.message());
    require(size == kCifarFileBytes, ErrorKind::Format,
            path.string() + ": expected " + std::to_string(kCifarFileBytes) + " bytes, found " + std::to_string(size));
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Io, "cannot open " + path.string());
    std::vector<unsigned char> buf(kCifarFileBytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(in.gcount() == static_cast<std::streamsize>(buf.size()), ErrorKind::Io, "short read on " + path.string());

    const std::size_t pixels = kCifarRecordBytes - 1;
    images.reserve(images.size() + kCifarRecordsPerFile * pixels);
    for (std::size_t r = 0; r < kCifarRecordsPerFile; ++r) {
        const unsigned char* rec = buf.data() + r * kCifarRecordBytes;
        require(rec[0] <= 9, ErrorKind::Format,
                path.string() + ": record " + std::to_string(r) + " has label byte " + std::to_string(rec[0]));
        labels.push_back(rec[0]);
        for (std::size_t k = 0; k < pixels; ++k)
            images.push_back(static_cast<float>(rec[1 + k]) / 255.0f);
    }
}

Dataset load_cifar10(const std::filesystem::path& dir, bool normalize, std::size_t train_subset, std::uint64_t seed)
{
    std::vector<float> train_images, test_images;
    std::vector<std::int32_t> train_labels, test_labels;
    for (int i = 1; i <= 5; ++i)
        read_cifar_file(dir / ("data_batch_" + std::to_string(i) + ".bin"), train_images, train_labels);
    read_cifar_file(dir / "test_batch.bin", test_images, test_labels);

    const std::size_t image_size = 3 * 32 * 32;
    auto pick = [&](std::size_t total, std::size_t keep, Rng& rng) {
        std::vector<std::size_t> idx(total);
        std::iota(idx.begin(), idx.end(), 0);
        if (keep > 0 && keep < total) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(keep);
            std::sort(idx.begin(), idx.end());
        }
        return idx;
    };
    Rng rng(seed);
    const auto train_idx = pick(train_labels.size(), train_subset, rng);
    const auto test_idx = pick(test_labels.size(), train_subset / 5, rng);

    Dataset d;
    d.height = d.width = 32;
    d.num_classes = 10;
    auto append = [&](const std::vector<float>& imgs, const std::vector<std::int32_t>& labs,
                      const std::vector<std::size_t>& idx, const std::string& split) {
        auto& s = d.splits[split];
        for (auto i : idx) {
            s.push_back(d.labels.size());
            d.labels.push_back(labs[i]);
            d.images.insert(d.images.end(), imgs.begin() + static_cast<std::ptrdiff_t>(i * image_size),
                            imgs.begin() + static_cast<std::ptrdiff_t>((i + 1) * image_size));
        }
    };
    append(train_images, train_labels, train_idx, "train");
    append(test_images, test_labels, test_idx, "test");

    if (normalize) {
        const std::size_t plane = 32 * 32;
        for (std::size_t n = 0; n < d.size(); ++n)
            for (std::size_t c = 0; c < 3; ++c) {
                float* p = d.images.data() + n * image_size + c * plane;
                for (std::size_t k = 0; k < plane; ++k)
                    p[k] = static_cast<float>((p[k] - kCifarMean[c]) / kCifarStd[c]);
            }
    }
    return d;
}

std::vector<Tensor> synthetic_templates(int num_classes, std::size_t hw, std::uint64_t seed)
{
    require(num_classes >= 2, ErrorKind::InvalidArgument, "synthetic dataset needs at least 2 classes");
    require(hw >= 4, ErrorKind::InvalidArgument, "synthetic image size must be at least 4");
    Rng rng(seed ^ 0x5eedc1a55ULL);
    std::uniform_real_distribution<double> colour(0.2, 1.0);
    std::uniform_real_distribution<double> jitter(-0.15, 0.15);
    const double size = static_cast<double>(hw);
    const double radius = size / 4.0;
    const double sigma = size / 7.0;
    std::vector<Tensor> templates;
    for (int c = 0; c < num_classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * (c + jitter(rng)) / num_classes;
        const double cy = size / 2.0 + radius * std::sin(angle);
        const double cx = size / 2.0 + radius * std::cos(angle);
        const double rgb[3] = {colour(rng), colour(rng), colour(rng)};
        Tensor t({3, hw, hw});
        for (std::size_t ch = 0; ch < 3; ++ch)
            for (std::size_t y = 0; y < hw; ++y)
                for (std::size_t x = 0; x < hw; ++x) {
                    const double dy = static_cast<double>(y) + 0.5 - cy;
                    const double dx = static_cast<double>(x) + 0.5 - cx;
                    const double blob = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                    t[(ch * hw + y) * hw + x] = 0.15 + 0.75 * rgb[ch] * blob;
                }
        templates.push_back(std::move(t));
    }
    return templates;
}

Dataset gen_synthetic(int num_classes, std::size_t n_per_class, std::size_t hw, std::uint64_t seed,
                      std::size_t n_test_per_class)
{
    const auto templates = synthetic_templates(num_classes, hw, seed);
    Dataset d;
    d.height = d.width = hw;
    d.num_classes = num_classes;
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 0.1);
    auto emit = [&](std::size_t per_class, const std::string& split) {
        auto& s = d.splits[split];
        for (std::size_t i = 0; i < per_class; ++i)
            for (int c = 0; c < num_classes; ++c) {
                s.push_back(d.labels.size());
                d.labels.push_back(c);
                for (double v : templates[static_cast<std::size_t>(c)].data())
                    d.images.push_back(static_cast<float>(std::clamp(v + noise(rng), 0.0, 1.0)));
            }
    };
    emit(n_per_class, "train");
    if (n_test_per_class > 0)
        emit(n_test_per_class, "test");
    return d;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> search_split(const Dataset& data,
                                                                            const std::string& split,
                                                                            std::uint64_t seed)
{
    std::vector<std::size_t> idx = data.split(split);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t half = idx.size() / 2;
    std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<std::size_t> valid(idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
    return {std::move(train), std::move(valid)};
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices)
{
    require(!indices.empty(), ErrorKind::InvalidArgument, "make_batch: empty index list");
    Batch b;
    b.images = Tensor({indices.size(), data.channels, data.height, data.width});
    const std::size_t sz = data.image_size();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        require(indices[i] < data.size(), ErrorKind::InvalidArgument, "make_batch: index out of range");
        const float* src = data.images.data() + indices[i] * sz;
        std::copy(src, src + sz, b.images.ptr() + i * sz);
        b.labels.push_back(data.labels[indices[i]]);
    }
    return b;
}

void augment_batch(Batch& batch, Rng& rng)
{
    const std::size_t n = batch.images.dim(0), c = batch.images.dim(1), h = batch.images.dim(2),
                      w = batch.images.dim(3);
    std::uniform_int_distribution<int> shift(-4, 4);
    std::bernoulli_distribution flip(0.5);
    std::vector<double> tmp(c * h * w);
    for (std::size_t i = 0; i < n; ++i) {
        const int dy = shift(rng), dx = shift(rng);
        const bool f = flip(rng);
        double* img = batch.images.ptr() + i * c * h * w;
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const long sy = static_cast<long>(y) + dy;
                    const long sxr = static_cast<long>(f ? w - 1 - x : x) + dx;
                    const bool inside = sy >= 0 && sy < static_cast<long>(h) && sxr >= 0 && sxr < static_cast<long>(w);
                    tmp[(ch * h + y) * w + x] = inside ? img[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sxr)] : 0.0;
                }
        std::copy(tmp.begin(), tmp.end(), img);
    }
}

void write_records(const Dataset& data, const std::string& split, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::Io, "cannot open " + path.string() + " for writing");
    const std::size_t sz = data.image_size();
    std::vector<unsigned char> rec(1 + sz);
    for (auto i : data.split(split)) {
        require(data.labels[i] >= 0 && data.labels[i] < 256, ErrorKind::InvalidArgument, "label does not fit a byte");
        rec[0] = static_cast<unsigned char>(data.labels[i]);
        for (std::size_t k = 0; k < sz; ++k) {
            const double v = std::clamp(static_cast<double>(data.images[i * sz + k]), 0.0, 1.0);
            rec[1 + k] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    }
    require(out.good(), ErrorKind::Io, "write failed for " + path.string());
}

} // namespace mixbit
