#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "nssr/error.hpp"

namespace nssr {

/// Row-major 2D array of doubles. Used for kernels, impulses and single image
/// planes.
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(std::size_t height, std::size_t width, double fill = 0.0)
      : height_(height), width_(width), values_(height * width, fill) {}
  Grid2D(std::size_t height, std::size_t width, std::vector<double> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != height_ * width_) {
      throw ConfigError("Grid2D: value count does not match height*width");
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t row, std::size_t col) { return values_[row * width_ + col]; }
  double operator()(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  bool all_finite() const noexcept {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

/// Channel-major stack of equally sized planes: value(c, y, x) lives at
/// c*H*W + y*W + x.
class ChannelStack {
 public:
  ChannelStack() = default;
  ChannelStack(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width),
        values_(channels * height * width, fill) {}

  static ChannelStack from_grid(const Grid2D& g) {
    ChannelStack s(1, g.height(), g.width());
    std::copy(g.values().begin(), g.values().end(), s.values_.begin());
    return s;
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept { return height_ * width_; }

  double& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return values_[(c * height_ + y) * width_ + x];
  }
  double operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return values_[(c * height_ + y) * width_ + x];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  Grid2D plane(std::size_t c) const {
    auto first = values_.begin() + static_cast<std::ptrdiff_t>(c * plane_size());
    return Grid2D(height_, width_, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(plane_size())));
  }

  friend bool operator==(const ChannelStack&, const ChannelStack&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

/// Bias-free 3x3 convolution weights, laid out [out][in][ky][kx].
class ConvLayerWeights {
 public:
  static constexpr std::size_t kKernel = 3;
  static constexpr std::size_t kTaps = kKernel * kKernel;

  ConvLayerWeights() = default;
  ConvLayerWeights(std::size_t out_channels, std::size_t in_channels, double fill = 0.0)
      : out_(out_channels), in_(in_channels), weights_(out_channels * in_channels * kTaps, fill) {}

  std::size_t out_channels() const noexcept { return out_; }
  std::size_t in_channels() const noexcept { return in_; }
  std::size_t size() const noexcept { return weights_.size(); }

  double& operator()(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
    return weights_[((o * in_ + i) * kKernel + ky) * kKernel + kx];
  }
  double operator()(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return weights_[((o * in_ + i) * kKernel + ky) * kKernel + kx];
  }

  std::span<double> values() noexcept { return weights_; }
  std::span<const double> values() const noexcept { return weights_; }

  friend bool operator==(const ConvLayerWeights&, const ConvLayerWeights&) = default;

 private:
  std::size_t out_ = 0;
  std::size_t in_ = 0;
  std::vector<double> weights_;
};

}  // namespace nssr
