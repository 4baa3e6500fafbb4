// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "numerics/tensor.hpp"

namespace mixbit {

// Images are N x channels x height x width, stored as float; named splits hold
// indices into the image list.
struct Dataset {
    std::size_t channels = 3;
    std::size_t height = 0;
    std::size_t width = 0;
    int num_classes = 0;
    std::vector<float> images;
    std::vector<std::int32_t> labels;
    std::map<std::string, std::vector<std::size_t>> splits;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t image_size() const noexcept { return channels * height * width; }
    const std::vector<std::size_t>& split(const std::string& name) const;
};

struct Batch {
    Tensor images;
    std::vector<std::int32_t> labels;
};

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarRecordsPerFile = 10000;
inline constexpr std::size_t kCifarFileBytes = kCifarRecordBytes * kCifarRecordsPerFile;

// Per-channel CIFAR-10 statistics used by normalize=true.
inline constexpr double kCifarMean[3] = {0.4914, 0.4822, 0.4465};
inline constexpr double kCifarStd[3] = {0.2470, 0.2435, 0.2616};

// Parses one CIFAR-10 binary batch file into (pixels in [0,1], labels).
void read_cifar_file(const std::filesystem::path& path, std::vector<float>& images, std::vector<std::int32_t>& labels);

// Loads data_batch_1..5.bin ("train") and test_batch.bin ("test"). When
// train_subset > 0, keeps a seeded subset of that many training images and
// train_subset/5 test images.
Dataset load_cifar10(const std::filesystem::path& dir, bool normalize, std::size_t train_subset = 0,
                     std::uint64_t seed = 0);

// Class-conditional Gaussian-blob + colour templates with additive N(0, 0.1)
// noise, clipped to [0,1]. Splits "train" and (when n_test_per_class > 0) "test".
Dataset gen_synthetic(int num_classes, std::size_t n_per_class, std::size_t hw, std::uint64_t seed,
                      std::size_t n_test_per_class = 0);

// The noise-free class templates used by gen_synthetic.
std::vector<Tensor> synthetic_templates(int num_classes, std::size_t hw, std::uint64_t seed);

// Deterministic 50/50 partition of a split into (train, valid).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> search_split(const Dataset& data,
                                                                            const std::string& split,
                                                                            std::uint64_t seed);

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices);

// Pad-4 random crop plus random horizontal flip, in place.
void augment_batch(Batch& batch, Rng& rng);

// Writes a split in CIFAR record layout (label byte, then channel-major pixel
// bytes). Values are rounded from [0,1] to [0,255].
void write_records(const Dataset& data, const std::string& split, const std::filesystem::path& path);

} // namespace mixbit
