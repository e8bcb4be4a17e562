#pragma once

#include <filesystem>
#include <variant>

#include "duplexmat/image.hpp"

namespace duplexmat {

/// What a PNG decodes to: RGB -> ImageRGB, RGBA -> RgbaForeground,
/// grayscale -> AlphaMatte.
using LoadedImage = std::variant<ImageRGB, RgbaForeground, AlphaMatte>;

enum class BitDepth { Eight = 8, Sixteen = 16 };

/// Integer codes map to [0,1] by 1/(2^depth - 1). No gamma handling.
LoadedImage load_png(const std::filesystem::path& path);

ImageRGB load_png_rgb(const std::filesystem::path& path);
RgbaForeground load_png_rgba(const std::filesystem::path& path);
AlphaMatte load_png_alpha(const std::filesystem::path& path);

void save_png(const ImageRGB& img, const std::filesystem::path& path,
              BitDepth depth = BitDepth::Sixteen);
void save_png(const RgbaForeground& img, const std::filesystem::path& path,
              BitDepth depth = BitDepth::Sixteen);
void save_png(const AlphaMatte& img, const std::filesystem::path& path,
              BitDepth depth = BitDepth::Sixteen);

}  // namespace duplexmat
