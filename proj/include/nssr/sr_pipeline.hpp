#pragma once

// Image-side pipeline: the blur-and-subsample degradation simulator and
// super-resolution as bicubic pre-upsampling followed by the learned inverse
// operator, applied per channel.

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "nssr/conv.hpp"
#include "nssr/error.hpp"
#include "nssr/image.hpp"
#include "nssr/kernel_gallery.hpp"
#include "nssr/lcnn.hpp"
#include "nssr/random.hpp"
#include "nssr/resample.hpp"

namespace nssr {

inline constexpr int kSupportedScales[] = {2, 3, 4, 8, 16, 32};

/// Same-size true convolution with an odd-sized kernel, replicating edge
/// pixels outside the image.
inline Grid2D convolve_replicate(const Grid2D& img, const Grid2D& k) {
  if (k.height() % 2 == 0 || k.width() % 2 == 0) throw ParameterError("convolution kernel must have odd size");
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  const auto w = static_cast<std::ptrdiff_t>(img.width());
  const auto cy = static_cast<std::ptrdiff_t>(k.height() / 2);
  const auto cx = static_cast<std::ptrdiff_t>(k.width() / 2);
  Grid2D out(img.height(), img.width());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(k.height()); ++m) {
        const auto sy = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(y - (m - cy), 0, h - 1));
        const double* row = img.data() + sy * img.width();
        const double* krow = k.data() + static_cast<std::size_t>(m) * k.width();
        for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(k.width()); ++n) {
          const auto sx = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(x - (n - cx), 0, w - 1));
          acc += krow[n] * row[sx];
        }
      }
      out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
    }
  }
  return out;
}

/// y = (X * K) subsampled by s: blur each channel with replicate padding and
/// keep pixels s*i + floor(s/2). Image sides must be multiples of s.
inline ImageTensor degrade(const ImageTensor& hr, const Grid2D& kernel, std::size_t s) {
  if (s == 0) throw ParameterError("scale factor must be positive");
  if (hr.height() % s != 0 || hr.width() % s != 0)
    throw ParameterError("image size " + std::to_string(hr.height()) + "x" + std::to_string(hr.width()) +
                         " is not divisible by scale " + std::to_string(s));
  if (kernel.height() % 2 == 0 || kernel.width() % 2 == 0) throw ParameterError("degradation kernel must have odd size");
  const std::size_t m = hr.height() / s;
  const std::size_t n = hr.width() / s;
  const std::size_t phase = s / 2;
  const auto h = static_cast<std::ptrdiff_t>(hr.height());
  const auto w = static_cast<std::ptrdiff_t>(hr.width());
  const auto cy = static_cast<std::ptrdiff_t>(kernel.height() / 2);
  const auto cx = static_cast<std::ptrdiff_t>(kernel.width() / 2);
  ImageTensor lr(m, n, hr.channels());
  for (std::size_t c = 0; c < hr.channels(); ++c) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto y = static_cast<std::ptrdiff_t>(i * s + phase);
      for (std::size_t j = 0; j < n; ++j) {
        const auto x = static_cast<std::ptrdiff_t>(j * s + phase);
        double acc = 0.0;
        for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(kernel.height()); ++a) {
          const auto sy = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(y - (a - cy), 0, h - 1));
          for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(kernel.width()); ++b) {
            const auto sx = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(x - (b - cx), 0, w - 1));
            acc += kernel(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) * hr(sy, sx, c);
          }
        }
        lr(i, j, c) = acc;
      }
    }
  }
  return lr;
}

/// Runs the network on every channel independently. The image is replicate-
/// padded by the receptive radius first and cropped afterwards, so the result
/// equals replicate-padded convolution with the effective kernel everywhere.
inline ImageTensor apply_network(const LcnnModel& model, const ImageTensor& img) {
  const std::size_t r = model.radius();
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  FeatureBatch in(img.channels(), 1, h + 2 * r, w + 2 * r);
  for (std::size_t c = 0; c < img.channels(); ++c)
    for (std::size_t y = 0; y < h + 2 * r; ++y) {
      const std::size_t sy = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(r), 0,
                                                        static_cast<std::ptrdiff_t>(h) - 1);
      for (std::size_t x = 0; x < w + 2 * r; ++x) {
        const std::size_t sx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x) - static_cast<std::ptrdiff_t>(r), 0,
                                                          static_cast<std::ptrdiff_t>(w) - 1);
        in.at(c, y, x, 0) = img(sy, sx, c);
      }
    }
  const FeatureBatch out = forward_batch(model, std::move(in));
  ImageTensor result(h, w, img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) result(y, x, c) = out.at(c, y + r, x + r, 0);
  return result;
}

inline ImageTensor apply_kernel(const Grid2D& kernel, const ImageTensor& img) {
  ImageTensor out(img.height(), img.width(), img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c) out.set_plane(c, convolve_replicate(img.plane(c), kernel));
  return out;
}

inline ImageTensor bicubic_upscale(const ImageTensor& lr, std::size_t s) {
  return bicubic_resize(lr, lr.height() * s, lr.width() * s);
}

namespace detail {
inline ImageTensor finish_sr(ImageTensor img) {
  if (!img.all_finite()) throw NumericError("super-resolution produced non-finite values");
  img.clamp01();
  return img;
}
}  // namespace detail

/// Bicubic x s upsampling followed by the network, clamped to [0, 1]. The same
/// model serves every scale factor.
inline ImageTensor super_resolve(const LcnnModel& model, const ImageTensor& lr, std::size_t s) {
  if (s == 0) throw ParameterError("scale factor must be positive");
  return detail::finish_sr(apply_network(model, bicubic_upscale(lr, s)));
}

/// Same as super_resolve but convolves with the collapsed effective kernel.
inline ImageTensor super_resolve_collapsed(const Grid2D& effective, const ImageTensor& lr, std::size_t s) {
  if (s == 0) throw ParameterError("scale factor must be positive");
  return detail::finish_sr(apply_kernel(effective, bicubic_upscale(lr, s)));
}

/// Kernel distribution for synthetic evaluation sets.
struct EvalKernelSpec {
  GalleryConfig ranges;  // kernel_size and sigma/theta ranges; count unused
  double noise = 0.0;    // entries multiplied by (1 + U[-noise, noise]) then renormalized

  /// Training-distribution kernels, with the larger supports used for x8+.
  static EvalKernelSpec in_distribution(std::size_t s) { return {GalleryConfig::for_scale(static_cast<int>(s)), 0.0}; }

  /// Held-out kernels: sigma in [3, 5], 11x11 at x2 and 21x21 otherwise, with
  /// multiplicative uniform noise.
  static EvalKernelSpec unseen(std::size_t s, double noise = 0.25) {
    EvalKernelSpec spec;
    spec.ranges.sigma_min = 3.0;
    spec.ranges.sigma_max = 5.0;
    spec.ranges.kernel_size = s <= 2 ? 11 : 21;
    spec.noise = noise;
    return spec;
  }
};

inline DegradationKernel sample_eval_kernel(const EvalKernelSpec& spec, Rng& rng) {
  spec.ranges.validate();
  if (!(spec.noise >= 0.0 && spec.noise < 1.0)) throw ParameterError("kernel noise must lie in [0, 1)");
  std::uniform_real_distribution<double> sigma(spec.ranges.sigma_min, spec.ranges.sigma_max);
  std::uniform_real_distribution<double> theta(spec.ranges.theta_min, spec.ranges.theta_max);
  GaussianParams p;
  p.sigma1 = sigma(rng);
  p.sigma2 = sigma(rng);
  p.theta = theta(rng);
  DegradationKernel k = sample_anisotropic_gaussian(p, spec.ranges.kernel_size);
  if (spec.noise > 0.0) {
    std::uniform_real_distribution<double> jitter(-spec.noise, spec.noise);
    for (double& v : k.grid.values()) v *= 1.0 + jitter(rng);
    const double total = grid_sum(k.grid);
    for (double& v : k.grid.values()) v /= total;
  }
  return k;
}

struct EvalTriple {
  ImageTensor hr;  // cropped to a multiple of the scale
  ImageTensor lr;  // 8-bit quantized, as it would be stored on disk
  DegradationKernel kernel;
};

/// Degrades every HR image with its own kernel. Image i draws from the stream
/// derive_seed(seed, i), so the set is reproducible and order-stable.
inline std::vector<EvalTriple> synth_eval_set(std::span<const ImageTensor> hr_images, const EvalKernelSpec& spec,
                                              std::size_t s, std::uint64_t seed) {
  std::vector<EvalTriple> out;
  out.reserve(hr_images.size());
  for (std::size_t i = 0; i < hr_images.size(); ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    EvalTriple t;
    t.hr = hr_images[i].cropped_to_multiple(s);
    t.kernel = sample_eval_kernel(spec, rng);
    t.lr = quantize_u8(degrade(t.hr, t.kernel.grid, s));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace nssr
