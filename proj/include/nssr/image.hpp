#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nssr/error.hpp"
#include "nssr/grid.hpp"

namespace nssr {

/// Planar H x W x C image (C is 1 or 3). Values are nominally in [0, 1] but
/// intermediates are left unclamped.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels), values_(height * width * channels, fill) {
    if (channels != 1 && channels != 3) throw ParameterError("images must have 1 or 3 channels");
  }

  static ImageTensor from_planes(std::span<const Grid2D> planes) {
    if (planes.empty()) throw ParameterError("from_planes: no planes");
    ImageTensor img(planes[0].height(), planes[0].width(), planes.size());
    for (std::size_t c = 0; c < planes.size(); ++c) img.set_plane(c, planes[c]);
    return img;
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t y, std::size_t x, std::size_t c) { return values_[(c * height_ + y) * width_ + x]; }
  double operator()(std::size_t y, std::size_t x, std::size_t c) const {
    return values_[(c * height_ + y) * width_ + x];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  Grid2D plane(std::size_t c) const {
    auto first = values_.begin() + static_cast<std::ptrdiff_t>(c * height_ * width_);
    return Grid2D(height_, width_, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(height_ * width_)));
  }

  void set_plane(std::size_t c, const Grid2D& g) {
    if (g.height() != height_ || g.width() != width_) throw ConfigError("set_plane: plane size mismatch");
    std::copy(g.values().begin(), g.values().end(), values_.begin() + static_cast<std::ptrdiff_t>(c * height_ * width_));
  }

  void clamp01() {
    for (double& v : values_) v = std::clamp(v, 0.0, 1.0);
  }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Crops to the top-left region whose sides are multiples of `s`.
  ImageTensor cropped_to_multiple(std::size_t s) const {
    const std::size_t h = height_ / s * s;
    const std::size_t w = width_ / s * s;
    if (h == 0 || w == 0) throw ParameterError("image smaller than the scale factor");
    ImageTensor out(h, w, channels_);
    for (std::size_t c = 0; c < channels_; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out(y, x, c) = (*this)(y, x, c);
    return out;
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

/// Quantizes to 8 bits with round-half-up of v*255 after clamping to [0, 1].
inline std::uint8_t to_u8(double v) {
  const double q = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(q);
}

/// Round-trips an image through 8-bit quantization without touching disk.
inline ImageTensor quantize_u8(const ImageTensor& image) {
  ImageTensor out = image;
  for (double& v : out.values()) v = to_u8(v) / 255.0;
  return out;
}

}  // namespace nssr
