#pragma once

// Slow reference implementations used only by the tests. Each one is written
// from the defining formula and shares no code path with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "nssr/grid.hpp"
#include "nssr/image.hpp"

namespace oracle {

inline nssr::Grid2D random_grid(std::size_t h, std::size_t w, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  nssr::Grid2D g(h, w);
  for (double& v : g.values()) v = u(rng);
  return g;
}

inline nssr::ChannelStack random_stack(std::size_t c, std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nssr::ChannelStack s(c, h, w);
  for (double& v : s.values()) v = u(rng);
  return s;
}

inline nssr::ConvLayerWeights random_weights(std::size_t out, std::size_t in, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nssr::ConvLayerWeights w(out, in);
  for (double& v : w.values()) v = u(rng);
  return w;
}

inline nssr::ImageTensor random_image(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  nssr::ImageTensor img(h, w, c);
  for (double& v : img.values()) v = u(rng);
  return img;
}

// out[i,j] = sum over (m,n) of a[m,n] * b[i-m, j-n].
inline nssr::Grid2D full_conv(const nssr::Grid2D& a, const nssr::Grid2D& b) {
  const long oh = static_cast<long>(a.height() + b.height() - 1);
  const long ow = static_cast<long>(a.width() + b.width() - 1);
  nssr::Grid2D out(static_cast<std::size_t>(oh), static_cast<std::size_t>(ow));
  for (long i = 0; i < oh; ++i)
    for (long j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (long m = 0; m < static_cast<long>(a.height()); ++m)
        for (long n = 0; n < static_cast<long>(a.width()); ++n) {
          const long p = i - m;
          const long q = j - n;
          if (p < 0 || q < 0 || p >= static_cast<long>(b.height()) || q >= static_cast<long>(b.width())) continue;
          acc += a(static_cast<std::size_t>(m), static_cast<std::size_t>(n)) *
                 b(static_cast<std::size_t>(p), static_cast<std::size_t>(q));
        }
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
    }
  return out;
}

// out[o,y,x] = sum_i sum_{dy,dx in -1..1} w[o,i,dy+1,dx+1] * in[i, y-dy, x-dx], zero outside.
inline nssr::ChannelStack conv_same(const nssr::ChannelStack& in, const nssr::ConvLayerWeights& w) {
  nssr::ChannelStack out(w.out_channels(), in.height(), in.width());
  const long h = static_cast<long>(in.height());
  const long wd = static_cast<long>(in.width());
  for (std::size_t o = 0; o < w.out_channels(); ++o)
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < wd; ++x) {
        double acc = 0.0;
        for (std::size_t i = 0; i < w.in_channels(); ++i)
          for (long dy = -1; dy <= 1; ++dy)
            for (long dx = -1; dx <= 1; ++dx) {
              const long sy = y - dy;
              const long sx = x - dx;
              if (sy < 0 || sx < 0 || sy >= h || sx >= wd) continue;
              acc += w(o, i, static_cast<std::size_t>(dy + 1), static_cast<std::size_t>(dx + 1)) *
                     in(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
        out(o, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
      }
  return out;
}

// Central difference of f at a single coordinate of `x`.
inline double central_difference(const std::function<double()>& f, double& x, double step) {
  const double saved = x;
  x = saved + step;
  const double plus = f();
  x = saved - step;
  const double minus = f();
  x = saved;
  return (plus - minus) / (2.0 * step);
}

inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Per-window SSIM with an explicitly built 2D Gaussian window.
inline double ssim_windowed(const nssr::Grid2D& a, const nssr::Grid2D& b) {
  const int win = 11;
  const double sigma = 1.5;
  std::vector<double> w2(win * win);
  double total = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double d2 = (i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0);
      w2[static_cast<std::size_t>(i * win + j)] = std::exp(-d2 / (2.0 * sigma * sigma));
      total += w2[static_cast<std::size_t>(i * win + j)];
    }
  for (double& v : w2) v /= total;
  const double c1 = 1e-4;
  const double c2 = 9e-4;
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y + win <= a.height(); ++y)
    for (std::size_t x = 0; x + win <= a.width(); ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double ww = w2[static_cast<std::size_t>(i * win + j)];
          ma += ww * a(y + static_cast<std::size_t>(i), x + static_cast<std::size_t>(j));
          mb += ww * b(y + static_cast<std::size_t>(i), x + static_cast<std::size_t>(j));
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double ww = w2[static_cast<std::size_t>(i * win + j)];
          const double da = a(y + static_cast<std::size_t>(i), x + static_cast<std::size_t>(j)) - ma;
          const double db = b(y + static_cast<std::size_t>(i), x + static_cast<std::size_t>(j)) - mb;
          va += ww * da * da;
          vb += ww * db * db;
          cov += ww * da * db;
        }
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++n;
    }
  return acc / static_cast<double>(n);
}

}  // namespace oracle
