#pragma once

#include <filesystem>
#include <string>

#include "confound/image.hpp"

namespace confound {

/// 16-bit grayscale PNG. Values are clamped to [0, 1] and quantised to
/// 0..65535. Reading accepts 8/16-bit gray (and converts RGB to gray).
void write_png16(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

/// Raw float plane: "CBIMGF32", u32 width, u32 height, W*H little-endian f32.
void write_raw_f32(const std::filesystem::path& path, const Image& img);
Image read_raw_f32(const std::filesystem::path& path);

/// Dispatches on extension: ".png" or ".f32"/".raw".
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

}  // namespace confound
