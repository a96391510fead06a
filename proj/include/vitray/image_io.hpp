#pragma once

#include <filesystem>

#include "vitray/image.hpp"

namespace vitray {

/// Decodes a PNG or JPEG file to grayscale. Color sources are collapsed via
/// the BT.601 luminance of image.hpp; 16-bit PNGs are reduced to 8 bits.
/// Throws IoError when the file cannot be opened and FormatError (naming the
/// path) when the bytes do not decode.
GrayImage load_image(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG with fixed encoder settings, so identical
/// pixels produce identical bytes.
void save_png(const GrayImage& img, const std::filesystem::path& path);

} // namespace vitray
