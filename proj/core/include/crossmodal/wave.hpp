#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

namespace crossmodal {

/// Writes 16-bit mono PCM as a standard RIFF/WAVE file.
void write_wave_file(const std::filesystem::path& path,
                     std::span<const std::int16_t> samples,
                     int sample_rate_hz);

}  // namespace crossmodal
