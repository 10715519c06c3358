#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "nssr/binary_io.hpp"
#include "nssr/conv.hpp"
#include "nssr/error.hpp"
#include "nssr/grid.hpp"
#include "nssr/random.hpp"

namespace nssr {

struct GaussianParams {
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double theta = 0.0;  // radians

  friend bool operator==(const GaussianParams&, const GaussianParams&) = default;
};

/// A normalized, non-negative blur kernel with odd side lengths, plus the
/// parameters it was drawn from.
struct DegradationKernel {
  Grid2D grid;
  GaussianParams params;

  friend bool operator==(const DegradationKernel&, const DegradationKernel&) = default;
};

struct GalleryConfig {
  std::uint64_t count = 3200;
  std::uint64_t kernel_size = 21;
  double sigma_min = 0.175;
  double sigma_max = 6.0;
  double theta_min = 0.0;
  double theta_max = std::numbers::pi;

  void validate() const {
    if (!(sigma_min > 0.0)) throw ParameterError("sigma_min must be positive");
    if (!(sigma_min < sigma_max)) throw ParameterError("sigma_min must be smaller than sigma_max");
    if (kernel_size % 2 == 0) throw ParameterError("kernel_size must be odd");
    if (!(theta_min <= theta_max)) throw ParameterError("theta_min must not exceed theta_max");
  }

  /// Kernel support and sigma range used for large scale factors: 31/41/51
  /// pixel kernels with sigma in [0.175, 3.1] for x8/x16/x32. Smaller factors
  /// keep the default 21x21, sigma in [0.175, 6] gallery.
  static GalleryConfig for_scale(int scale) {
    GalleryConfig c;
    if (scale >= 8) {
      c.sigma_max = 3.1;
      c.kernel_size = scale >= 32 ? 51 : scale >= 16 ? 41 : 31;
    }
    return c;
  }

  friend bool operator==(const GalleryConfig&, const GalleryConfig&) = default;
};

struct KernelGallery {
  std::vector<DegradationKernel> kernels;
  std::uint64_t seed = 0;
  GalleryConfig config;

  friend bool operator==(const KernelGallery&, const KernelGallery&) = default;
};

/// Gaussian density exp(-d^T S^-1 d / 2) sampled at integer offsets d from the
/// center pixel, S = R(theta) diag(s1^2, s2^2) R(theta)^T, normalized to sum 1.
inline DegradationKernel sample_anisotropic_gaussian(const GaussianParams& p, std::size_t size) {
  if (size % 2 == 0 || size == 0) throw ParameterError("kernel size must be odd");
  if (!(p.sigma1 > 0.0) || !(p.sigma2 > 0.0)) throw ParameterError("kernel sigmas must be positive");

  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  const double v1 = p.sigma1 * p.sigma1;
  const double v2 = p.sigma2 * p.sigma2;
  // Inverse covariance R diag(1/v1, 1/v2) R^T.
  const double a = c * c / v1 + s * s / v2;
  const double b = c * s * (1.0 / v1 - 1.0 / v2);
  const double d = s * s / v1 + c * c / v2;

  Grid2D g(size, size);
  const double center = static_cast<double>(size - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double di = static_cast<double>(i) - center;
    for (std::size_t j = 0; j < size; ++j) {
      const double dj = static_cast<double>(j) - center;
      const double q = a * di * di + 2.0 * b * di * dj + d * dj * dj;
      g(i, j) = std::exp(-0.5 * q);
      total += g(i, j);
    }
  }
  for (double& v : g.values()) v /= total;
  return {std::move(g), p};
}

inline KernelGallery generate_gallery(const GalleryConfig& config, std::uint64_t seed) {
  config.validate();
  KernelGallery gallery{{}, seed, config};
  gallery.kernels.reserve(config.count);
  Rng rng(seed);
  std::uniform_real_distribution<double> sigma(config.sigma_min, config.sigma_max);
  std::uniform_real_distribution<double> theta(config.theta_min, config.theta_max);
  for (std::uint64_t k = 0; k < config.count; ++k) {
    GaussianParams p;
    p.sigma1 = sigma(rng);
    p.sigma2 = sigma(rng);
    p.theta = theta(rng);
    gallery.kernels.push_back(sample_anisotropic_gaussian(p, config.kernel_size));
  }
  return gallery;
}

/// Discrete impulse: 1 at the center pixel of a size x size grid.
inline Grid2D delta_target(std::size_t size) {
  if (size % 2 == 0 || size == 0) throw ParameterError("impulse size must be odd");
  Grid2D g(size, size);
  g(size / 2, size / 2) = 1.0;
  return g;
}

inline constexpr std::uint32_t kGalleryVersion = 1;

inline void save_gallery(const KernelGallery& g, const std::filesystem::path& path) {
  binary::Writer w;
  w.header("GALL", kGalleryVersion);
  w.u64(g.seed);
  w.u64(g.config.count);
  w.u64(g.config.kernel_size);
  w.f64(g.config.sigma_min);
  w.f64(g.config.sigma_max);
  w.f64(g.config.theta_min);
  w.f64(g.config.theta_max);
  w.u64(g.kernels.size());
  for (const auto& k : g.kernels) {
    if (k.grid.height() != g.config.kernel_size || k.grid.width() != g.config.kernel_size)
      throw ConfigError("save_gallery: kernel size disagrees with gallery config");
    w.f64(k.params.sigma1);
    w.f64(k.params.sigma2);
    w.f64(k.params.theta);
    w.f64s(k.grid.values());
  }
  w.save(path);
}

inline KernelGallery load_gallery(const std::filesystem::path& path) {
  auto r = binary::Reader::open(path);
  const std::uint32_t version = r.header("GALL");
  if (version != kGalleryVersion)
    throw FormatError("unsupported gallery version " + std::to_string(version), r.offset() - 4);

  KernelGallery g;
  g.seed = r.u64();
  g.config.count = r.u64();
  const std::size_t size_at = r.offset();
  g.config.kernel_size = r.u64();
  g.config.sigma_min = r.f64();
  g.config.sigma_max = r.f64();
  g.config.theta_min = r.f64();
  g.config.theta_max = r.f64();
  if (g.config.kernel_size % 2 == 0 || g.config.kernel_size > 4096)
    throw FormatError("invalid kernel size " + std::to_string(g.config.kernel_size), size_at);
  const std::size_t stored_at = r.offset();
  const std::uint64_t stored = r.u64();
  if (stored != g.config.count)
    throw FormatError("declared count " + std::to_string(g.config.count) + " but " + std::to_string(stored) +
                          " kernels stored",
                      stored_at);

  const std::size_t cells = g.config.kernel_size * g.config.kernel_size;
  if (stored > r.remaining() / ((cells + 3) * 8))
    throw FormatError("truncated file: " + std::to_string(stored) + " kernels declared", r.offset());
  g.kernels.reserve(stored);
  for (std::uint64_t k = 0; k < stored; ++k) {
    DegradationKernel dk;
    dk.params.sigma1 = r.f64();
    dk.params.sigma2 = r.f64();
    dk.params.theta = r.f64();
    dk.grid = Grid2D(g.config.kernel_size, g.config.kernel_size, r.f64s(cells));
    g.kernels.push_back(std::move(dk));
  }
  r.expect_end();
  return g;
}

}  // namespace nssr
