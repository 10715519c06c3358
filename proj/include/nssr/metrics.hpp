#pragma once

// Full-reference quality metrics on [0, 1] images: PSNR (peak 1.0) and
// single-scale SSIM on BT.601 luminance.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "nssr/error.hpp"
#include "nssr/grid.hpp"
#include "nssr/image.hpp"

namespace nssr {

struct MetricReport {
  double psnr_db = 0.0;  // +infinity for identical images
  double ssim = 0.0;
  std::size_t border_crop = 0;
};

namespace detail {

inline void check_pair(const ImageTensor& a, const ImageTensor& b, std::size_t crop) {
  if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels())
    throw ConfigError("metric inputs differ in size or channel count");
  if (2 * crop >= a.height() || 2 * crop >= a.width()) throw ParameterError("border crop removes the whole image");
}

}  // namespace detail

/// 10*log10(1/MSE), MSE averaged over all channels of the crop-trimmed region.
inline double psnr(const ImageTensor& a, const ImageTensor& b, std::size_t crop = 0) {
  detail::check_pair(a, b, crop);
  double sse = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < a.channels(); ++c)
    for (std::size_t y = crop; y < a.height() - crop; ++y)
      for (std::size_t x = crop; x < a.width() - crop; ++x) {
        const double d = a(y, x, c) - b(y, x, c);
        sse += d * d;
        ++n;
      }
  const double mse = sse / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

/// BT.601 luma for RGB, the plane itself for gray, trimmed by `crop` pixels.
inline Grid2D luminance(const ImageTensor& img, std::size_t crop = 0) {
  Grid2D y(img.height() - 2 * crop, img.width() - 2 * crop);
  for (std::size_t r = 0; r < y.height(); ++r)
    for (std::size_t c = 0; c < y.width(); ++c) {
      if (img.channels() == 1) {
        y(r, c) = img(r + crop, c + crop, 0);
      } else {
        y(r, c) = 0.299 * img(r + crop, c + crop, 0) + 0.587 * img(r + crop, c + crop, 1) +
                  0.114 * img(r + crop, c + crop, 2);
      }
    }
  return y;
}

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

inline std::vector<double> gaussian_window_1d(std::size_t size = kSsimWindow, double sigma = kSsimSigma) {
  std::vector<double> w(size);
  const double c = static_cast<double>(size - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

/// Mean SSIM map over every fully contained 11x11 window of two planes.
inline double ssim_plane(const Grid2D& a, const Grid2D& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw ConfigError("ssim: plane size mismatch");
  if (a.height() < kSsimWindow || a.width() < kSsimWindow)
    throw ParameterError("ssim: image smaller than the 11x11 window after cropping");
  const auto w = gaussian_window_1d();
  const std::size_t oh = a.height() - kSsimWindow + 1;
  const std::size_t ow = a.width() - kSsimWindow + 1;

  // Separable filtering of a, b, a^2, b^2, ab: horizontal pass then vertical.
  const std::size_t h = a.height();
  std::vector<double> hz(5 * h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s[5] = {0, 0, 0, 0, 0};
      for (std::size_t k = 0; k < kSsimWindow; ++k) {
        const double va = a(y, x + k);
        const double vb = b(y, x + k);
        s[0] += w[k] * va;
        s[1] += w[k] * vb;
        s[2] += w[k] * va * va;
        s[3] += w[k] * vb * vb;
        s[4] += w[k] * va * vb;
      }
      for (int q = 0; q < 5; ++q) hz[(static_cast<std::size_t>(q) * h + y) * ow + x] = s[q];
    }
  double total = 0.0;
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s[5] = {0, 0, 0, 0, 0};
      for (std::size_t k = 0; k < kSsimWindow; ++k)
        for (int q = 0; q < 5; ++q) s[q] += w[k] * hz[(static_cast<std::size_t>(q) * h + y + k) * ow + x];
      const double mu_a = s[0];
      const double mu_b = s[1];
      const double var_a = s[2] - mu_a * mu_a;
      const double var_b = s[3] - mu_b * mu_b;
      const double cov = s[4] - mu_a * mu_b;
      total += ((2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2)) /
               ((mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2));
    }
  return total / static_cast<double>(oh * ow);
}

inline double ssim(const ImageTensor& a, const ImageTensor& b, std::size_t crop = 0) {
  detail::check_pair(a, b, crop);
  return ssim_plane(luminance(a, crop), luminance(b, crop));
}

inline MetricReport evaluate(const ImageTensor& result, const ImageTensor& reference, std::size_t crop) {
  return {psnr(result, reference, crop), ssim(result, reference, crop), crop};
}

}  // namespace nssr
