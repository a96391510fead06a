#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vitray/image.hpp"

namespace vitray {

struct Sample {
    ImageTensor image; ///< (3, H, W) after the preprocessing chain
    int label = 0;     ///< class index; 0 = Normal, 1 = Abnormal
};

struct LabeledDataset {
    std::vector<Sample> samples;
    std::vector<std::string> class_names{"Normal", "Abnormal"};

    std::size_t size() const { return samples.size(); }
};

/// Deterministic train/test partition of indices 0..n-1.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    double ratio = 0.0;
    std::uint64_t seed = 0;
};

/// Shuffles 0..n-1 with the SplitMix64 stream seed_stream(seed, "split") and
/// assigns the first floor(ratio * n) indices to train. Pure function of
/// (n, ratio, seed).
SplitIndices split_dataset(std::size_t n, double ratio, std::uint64_t seed);

/// Consecutive chunks of `indices`; the final batch may be short.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& indices,
                                                   std::size_t batch_size);

/// Synthetic desk-scale stand-in for radiograph datasets. Class 0 is a dark
/// background with a bright centered disk; class 1 a bright background with
/// a dark off-center disk. Gaussian pixel noise (sigma = 10 intensity
/// levels, clamped) comes from seed_stream(seed, "synth"), so a seed fixes
/// the dataset bitwise. Class 1 has strictly higher mean intensity.
std::vector<std::pair<GrayImage, int>> generate_synthetic_images(std::size_t n_per_class,
                                                                 std::size_t height,
                                                                 std::size_t width,
                                                                 std::uint64_t seed);

/// generate_synthetic_images run through normalize + replicate_channels.
LabeledDataset generate_synthetic(std::size_t n_per_class, std::size_t height,
                                  std::size_t width, std::uint64_t seed);

/// Writes the synthetic images as root/<ClassName>/img_NNNN.png, mirroring
/// the layout load_directory_dataset ingests.
std::size_t write_synthetic_directory(const std::filesystem::path& root,
                                      std::size_t n_per_class, std::size_t size,
                                      std::uint64_t seed,
                                      const std::vector<std::string>& class_names = {
                                          "Normal", "Abnormal"});

/// Loads root/<ClassName>/* through resize -> normalize -> replicate.
/// Files are visited in lexicographic path order; undecodable files are
/// skipped with a warning on stderr. Throws when no image loads at all.
LabeledDataset load_directory_dataset(const std::filesystem::path& root,
                                      std::size_t image_size,
                                      const std::vector<std::string>& class_names = {
                                          "Normal", "Abnormal"},
                                      bool standardize_imagenet = false);

} // namespace vitray
