#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "nssr/error.hpp"
#include "nssr/image.hpp"

namespace nssr {

/// Keys cubic convolution kernel with parameter a (a = -0.5 for bicubic).
inline double cubic_kernel(double x, double a = -0.5) {
  const double ax = std::abs(x);
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

struct ResampleTaps {
  std::vector<std::size_t> first;  // per output sample, offset into index/weight
  std::vector<std::size_t> count;
  std::vector<std::size_t> index;  // clamped source index (edge replicate)
  std::vector<double> weight;
};

/// 1D taps for mapping n_in samples onto n_out with half-pixel-centered
/// coordinates. Downscaling widens the kernel by the inverse scale.
inline ResampleTaps resample_taps(std::size_t n_in, std::size_t n_out) {
  const double scale = static_cast<double>(n_out) / static_cast<double>(n_in);
  const double kscale = std::min(scale, 1.0);
  const double support = 2.0 / kscale;
  ResampleTaps t;
  t.first.reserve(n_out);
  t.count.reserve(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil(u - support));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(u + support));
    const std::size_t start = t.weight.size();
    double total = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      const double w = kscale * cubic_kernel(kscale * (u - static_cast<double>(j)));
      if (w == 0.0) continue;
      const auto clamped = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(n_in) - 1);
      t.index.push_back(static_cast<std::size_t>(clamped));
      t.weight.push_back(w);
      total += w;
    }
    for (std::size_t k = start; k < t.weight.size(); ++k) t.weight[k] /= total;
    t.first.push_back(start);
    t.count.push_back(t.weight.size() - start);
  }
  return t;
}

/// Separable bicubic resampling (a = -0.5), edge-replicate boundary,
/// antialiased when shrinking.
inline ImageTensor bicubic_resize(const ImageTensor& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ParameterError("bicubic_resize: output size must be positive");
  if (img.empty()) throw ParameterError("bicubic_resize: empty image");
  const ResampleTaps rows = resample_taps(img.height(), out_h);
  const ResampleTaps cols = resample_taps(img.width(), out_w);
  ImageTensor out(out_h, out_w, img.channels());
  std::vector<double> tmp(img.height() * out_w);
  for (std::size_t c = 0; c < img.channels(); ++c) {
    for (std::size_t y = 0; y < img.height(); ++y) {
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t k = cols.first[x]; k < cols.first[x] + cols.count[x]; ++k)
          acc += cols.weight[k] * img(y, cols.index[k], c);
        tmp[y * out_w + x] = acc;
      }
    }
    for (std::size_t y = 0; y < out_h; ++y) {
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t k = rows.first[y]; k < rows.first[y] + rows.count[y]; ++k)
          acc += rows.weight[k] * tmp[rows.index[k] * out_w + x];
        out(y, x, c) = acc;
      }
    }
  }
  return out;
}

}  // namespace nssr
