#pragma once

#include <filesystem>
#include <span>

namespace crossmodal {

/// Writes one grayscale frame (values in [0,1], row-major) as an 8-bit PNG.
void write_grayscale_png(const std::filesystem::path& path,
                         std::span<const double> pixels, int height,
                         int width);

}  // namespace crossmodal
