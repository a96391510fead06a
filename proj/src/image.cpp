#include "vitray/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vitray {

GrayImage make_gray(std::size_t height, std::size_t width, std::uint8_t fill) {
    if (height == 0 || width == 0) {
        throw ContractError("image dimensions must be positive");
    }
    GrayImage img;
    img.height = height;
    img.width = width;
    img.pixels.assign(height * width, fill);
    return img;
}

std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    double y = 0.299 * r + 0.587 * g + 0.114 * b;
    double rounded = std::floor(y + 0.5);
    return static_cast<std::uint8_t>(std::clamp(rounded, 0.0, 255.0));
}

GrayImage resize_bilinear(const GrayImage& img, std::size_t out_h, std::size_t out_w) {
    if (img.height == 0 || img.width == 0) throw ContractError("resize: empty image");
    if (out_h == 0 || out_w == 0) {
        throw ContractError("resize: target dimensions must be positive");
    }
    GrayImage out = make_gray(out_h, out_w);
    const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
    const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
    for (std::size_t i = 0; i < out_h; ++i) {
        // Half-pixel centers: output center (i + 0.5) maps to source
        // coordinate (i + 0.5) * scale - 0.5.
        double fy = (static_cast<double>(i) + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
        std::size_t y0 = static_cast<std::size_t>(fy);
        std::size_t y1 = std::min(y0 + 1, img.height - 1);
        double wy = fy - static_cast<double>(y0);
        for (std::size_t j = 0; j < out_w; ++j) {
            double fx = (static_cast<double>(j) + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
            std::size_t x0 = static_cast<std::size_t>(fx);
            std::size_t x1 = std::min(x0 + 1, img.width - 1);
            double wx = fx - static_cast<double>(x0);
            double top = (1.0 - wx) * img.at(y0, x0) + wx * img.at(y0, x1);
            double bot = (1.0 - wx) * img.at(y1, x0) + wx * img.at(y1, x1);
            double v = (1.0 - wy) * top + wy * bot;
            double rounded = std::floor(v + 0.5);
            out.pixels[i * out_w + j] =
                static_cast<std::uint8_t>(std::clamp(rounded, 0.0, 255.0));
        }
    }
    return out;
}

ImageTensor normalize(const GrayImage& img) {
    ImageTensor t;
    t.channels = 1;
    t.height = img.height;
    t.width = img.width;
    t.values.resize(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        t.values[i] = static_cast<double>(img.pixels[i]) / 255.0;
    }
    return t;
}

ImageTensor replicate_channels(const ImageTensor& t) {
    if (t.channels != 1) {
        throw ContractError("replicate_channels: expected 1 channel, got " +
                            std::to_string(t.channels));
    }
    ImageTensor out;
    out.channels = 3;
    out.height = t.height;
    out.width = t.width;
    out.values.resize(3 * t.values.size());
    for (std::size_t c = 0; c < 3; ++c) {
        std::copy(t.values.begin(), t.values.end(),
                  out.values.begin() + static_cast<std::ptrdiff_t>(c * t.values.size()));
    }
    return out;
}

ImageTensor extract_channel(const ImageTensor& t, std::size_t channel) {
    if (channel >= t.channels) {
        throw ContractError("extract_channel: channel " + std::to_string(channel) +
                            " out of range for " + std::to_string(t.channels));
    }
    ImageTensor out;
    out.channels = 1;
    out.height = t.height;
    out.width = t.width;
    const std::size_t plane = t.height * t.width;
    out.values.assign(t.values.begin() + static_cast<std::ptrdiff_t>(channel * plane),
                      t.values.begin() + static_cast<std::ptrdiff_t>((channel + 1) * plane));
    return out;
}

ImageTensor standardize(const ImageTensor& t, const std::vector<double>& mean,
                        const std::vector<double>& stddev) {
    if (mean.size() != t.channels || stddev.size() != t.channels) {
        throw ContractError("standardize: per-channel statistics do not match image");
    }
    ImageTensor out = t;
    const std::size_t plane = t.height * t.width;
    for (std::size_t c = 0; c < t.channels; ++c) {
        if (stddev[c] <= 0.0) throw ContractError("standardize: std must be positive");
        for (std::size_t i = 0; i < plane; ++i) {
            out.values[c * plane + i] = (t.values[c * plane + i] - mean[c]) / stddev[c];
        }
    }
    return out;
}

} // namespace vitray
