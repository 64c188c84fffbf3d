#include "crossmodal/wave.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "crossmodal/common.hpp"

namespace crossmodal {

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  std::array<char, 4> b{static_cast<char>(v & 0xff),
                        static_cast<char>((v >> 8) & 0xff),
                        static_cast<char>((v >> 16) & 0xff),
                        static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  std::array<char, 2> b{static_cast<char>(v & 0xff),
                        static_cast<char>((v >> 8) & 0xff)};
  out.write(b.data(), 2);
}

}  // namespace

void write_wave_file(const std::filesystem::path& path,
                     std::span<const std::int16_t> samples,
                     int sample_rate_hz) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_wave_file: cannot open " + path.string());

  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(samples.size() * 2);
  const std::uint32_t byte_rate = static_cast<std::uint32_t>(sample_rate_hz) * 2;

  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
  put_u32(out, byte_rate);
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits per sample
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (std::int16_t s : samples)
    put_u16(out, static_cast<std::uint16_t>(s));
  if (!out) throw Error("write_wave_file: write failed for " + path.string());
}

}  // namespace crossmodal
