#include "vitray/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>

#include "vitray/image_io.hpp"
#include "vitray/rng.hpp"

namespace vitray {

namespace fs = std::filesystem;

SplitIndices split_dataset(std::size_t n, double ratio, std::uint64_t seed) {
    if (n == 0) throw ContractError("split_dataset: empty dataset");
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ContractError("split_dataset: ratio must lie in (0, 1), got " +
                            std::to_string(ratio));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng = seed_stream(seed, "split");
    shuffle(order, rng);
    // Nudge before flooring so ratios like 0.7 * 10 land on the exact integer.
    auto n_train = static_cast<std::size_t>(
        std::floor(ratio * static_cast<double>(n) + 1e-9));
    SplitIndices split;
    split.ratio = ratio;
    split.seed = seed;
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return split;
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& indices,
                                                   std::size_t batch_size) {
    if (batch_size == 0) throw ContractError("make_batches: batch_size must be >= 1");
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < indices.size(); at += batch_size) {
        std::size_t end = std::min(at + batch_size, indices.size());
        batches.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(at),
                             indices.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

namespace {

void stamp_disk(GrayImage& img, double cy, double cx, double radius, std::uint8_t value) {
    for (std::size_t i = 0; i < img.height; ++i) {
        for (std::size_t j = 0; j < img.width; ++j) {
            double dy = static_cast<double>(i) - cy;
            double dx = static_cast<double>(j) - cx;
            if (dy * dy + dx * dx <= radius * radius) {
                img.pixels[i * img.width + j] = value;
            }
        }
    }
}

void add_noise(GrayImage& img, SplitMix64& rng) {
    for (auto& p : img.pixels) {
        double v = static_cast<double>(p) + 10.0 * rng.next_gaussian();
        p = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
}

} // namespace

std::vector<std::pair<GrayImage, int>> generate_synthetic_images(std::size_t n_per_class,
                                                                 std::size_t height,
                                                                 std::size_t width,
                                                                 std::uint64_t seed) {
    if (n_per_class == 0) throw ContractError("generate_synthetic: n_per_class must be >= 1");
    if (height == 0 || width == 0) throw ContractError("generate_synthetic: empty image size");
    SplitMix64 rng = seed_stream(seed, "synth");
    const double h = static_cast<double>(height);
    const double w = static_cast<double>(width);
    std::vector<std::pair<GrayImage, int>> out;
    out.reserve(2 * n_per_class);
    // Class 0: dark field, bright centered disk. Mean intensity ~60.
    for (std::size_t i = 0; i < n_per_class; ++i) {
        GrayImage img = make_gray(height, width, 30);
        stamp_disk(img, (h - 1.0) / 2.0, (w - 1.0) / 2.0, h / 4.0, 200);
        add_noise(img, rng);
        out.emplace_back(std::move(img), 0);
    }
    // Class 1: bright field, dark off-center disk. Mean intensity ~200, so
    // the two classes separate linearly on mean brightness alone.
    for (std::size_t i = 0; i < n_per_class; ++i) {
        GrayImage img = make_gray(height, width, 220);
        stamp_disk(img, 0.35 * h, 0.6 * w, h / 5.0, 60);
        add_noise(img, rng);
        out.emplace_back(std::move(img), 1);
    }
    return out;
}

LabeledDataset generate_synthetic(std::size_t n_per_class, std::size_t height,
                                  std::size_t width, std::uint64_t seed) {
    LabeledDataset ds;
    for (auto& [img, label] : generate_synthetic_images(n_per_class, height, width, seed)) {
        ds.samples.push_back({replicate_channels(normalize(img)), label});
    }
    return ds;
}

std::size_t write_synthetic_directory(const fs::path& root, std::size_t n_per_class,
                                      std::size_t size, std::uint64_t seed,
                                      const std::vector<std::string>& class_names) {
    if (class_names.size() != 2) {
        throw ContractError("write_synthetic_directory: expected two class names");
    }
    auto images = generate_synthetic_images(n_per_class, size, size, seed);
    std::error_code ec;
    for (const auto& name : class_names) {
        fs::create_directories(root / name, ec);
        if (ec) throw IoError("cannot create " + (root / name).string());
    }
    std::size_t per_class_counter[2] = {0, 0};
    for (const auto& [img, label] : images) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%04zu.png", per_class_counter[label]++);
        save_png(img, root / class_names[static_cast<std::size_t>(label)] / name);
    }
    return images.size();
}

LabeledDataset load_directory_dataset(const fs::path& root, std::size_t image_size,
                                      const std::vector<std::string>& class_names,
                                      bool standardize_imagenet) {
    if (image_size == 0) throw ContractError("load_directory_dataset: image_size must be >= 1");
    bool any_class_dir = false;
    LabeledDataset ds;
    ds.class_names = class_names;
    for (std::size_t label = 0; label < class_names.size(); ++label) {
        fs::path dir = root / class_names[label];
        if (!fs::is_directory(dir)) continue;
        any_class_dir = true;
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        // Lexicographic order keeps loads independent of enumeration order.
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            std::cerr << "warning: class directory is empty: " << dir.string() << '\n';
        }
        for (const auto& file : files) {
            GrayImage img;
            try {
                img = load_image(file);
            } catch (const Error& e) {
                std::cerr << "warning: skipping " << file.string() << ": " << e.what()
                          << '\n';
                continue;
            }
            ImageTensor t = replicate_channels(
                normalize(resize_bilinear(img, image_size, image_size)));
            if (standardize_imagenet) t = standardize(t, kImagenetMean, kImagenetStd);
            ds.samples.push_back({std::move(t), static_cast<int>(label)});
        }
    }
    if (!any_class_dir) {
        throw ContractError("no class subdirectories under " + root.string());
    }
    if (ds.samples.empty()) {
        throw Error("no decodable images under " + root.string());
    }
    return ds;
}

} // namespace vitray
