#pragma once

#include <filesystem>

#include "uscd/grid.hpp"

namespace scd_cli {

/// Blends `mask` in red over `image` and writes an 8-bit RGB PNG.
void write_overlay_png(const uscd::RgbImage& image, const uscd::Mask& mask, const std::filesystem::path& path);

}  // namespace scd_cli
