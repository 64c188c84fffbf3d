#include "crossmodal/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "crossmodal/common.hpp"

namespace crossmodal {

void write_grayscale_png(const std::filesystem::path& path,
                         std::span<const double> pixels, int height,
                         int width) {
  if (static_cast<std::size_t>(height) * width != pixels.size())
    throw ShapeMismatch("write_grayscale_png: pixel count != height*width");

  std::vector<png_byte> bytes(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double v = std::clamp(pixels[i], 0.0, 1.0);
    bytes[i] = static_cast<png_byte>(std::lround(v * 255.0));
  }

  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error("write_grayscale_png: cannot open " + path.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw Error("write_grayscale_png: libpng failure for " + path.string());
  }

  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * width);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace crossmodal
