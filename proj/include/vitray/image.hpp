#pragma once

#include <cstdint>
#include <vector>

#include "vitray/error.hpp"

namespace vitray {

/// Single-channel 8-bit image, row-major.
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(std::size_t row, std::size_t col) const {
        return pixels[row * width + col];
    }

    bool operator==(const GrayImage&) const = default;
};

GrayImage make_gray(std::size_t height, std::size_t width, std::uint8_t fill = 0);

/// Channel-major (C, H, W) float image. Produced by normalize(), values lie
/// in [0, 1].
struct ImageTensor {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    double at(std::size_t c, std::size_t row, std::size_t col) const {
        return values[(c * height + row) * width + col];
    }

    bool operator==(const ImageTensor&) const = default;
};

/// ITU-R BT.601 luminance, rounded half up. Used to collapse accidental
/// color inputs to grayscale.
std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Bilinear resize with half-pixel-centered sampling; outputs are clamped to
/// [0, 255] and rounded half up. Resizing to the source size is the identity.
GrayImage resize_bilinear(const GrayImage& img, std::size_t out_h, std::size_t out_w);

/// value(i, j) = pixel(i, j) / 255, exactly; output shape (1, H, W).
ImageTensor normalize(const GrayImage& img);

/// Copies the single input plane into three identical channels.
ImageTensor replicate_channels(const ImageTensor& t);

/// Extracts one channel plane as a (1, H, W) tensor; the exact inverse of
/// replicate_channels for any of its three output channels.
ImageTensor extract_channel(const ImageTensor& t, std::size_t channel);

/// Optional post-normalization standardization (value - mean[c]) / std[c],
/// for experiments that import externally pretrained weights. Off by default
/// everywhere.
ImageTensor standardize(const ImageTensor& t, const std::vector<double>& mean,
                        const std::vector<double>& stddev);

/// Channel statistics published with vit-base-patch16-224 checkpoints.
inline const std::vector<double> kImagenetMean{0.5, 0.5, 0.5};
inline const std::vector<double> kImagenetStd{0.5, 0.5, 0.5};

} // namespace vitray
