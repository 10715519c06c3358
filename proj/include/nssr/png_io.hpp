#pragma once

// 8-bit PNG I/O through libpng's simplified API. Link with PNG::PNG.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <png.h>

#include "nssr/error.hpp"
#include "nssr/image.hpp"

namespace nssr {

/// Reads an 8-bit PNG as gray (1 channel) or RGB (3 channels); alpha is
/// dropped. Values are mapped to [0, 1] by /255.
inline ImageTensor read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const std::size_t c = gray ? 1 : 3;
  ImageTensor out(img.height, img.width, c);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t k = 0; k < c; ++k) out(y, x, k) = buf[(y * img.width + x) * c + k] / 255.0;
  return out;
}

inline void write_png(const ImageTensor& image, const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = image.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const std::size_t c = image.channels();
  std::vector<std::uint8_t> buf(image.width() * image.height() * c);
  for (std::size_t y = 0; y < image.height(); ++y)
    for (std::size_t x = 0; x < image.width(); ++x)
      for (std::size_t k = 0; k < c; ++k) buf[(y * image.width() + x) * c + k] = to_u8(image(y, x, k));
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
}

}  // namespace nssr
