#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nssr/error.hpp"
#include "nssr/grid.hpp"

namespace nssr {

/// Full linear convolution: out[i,j] = sum a[m,n] * b[i-m, j-n], output size
/// (Ha+Hb-1) x (Wa+Wb-1).
inline Grid2D conv2d_full(const Grid2D& a, const Grid2D& b) {
  if (a.empty() || b.empty()) throw ConfigError("conv2d_full: empty operand");
  Grid2D out(a.height() + b.height() - 1, a.width() + b.width() - 1);
  for (std::size_t m = 0; m < a.height(); ++m) {
    for (std::size_t n = 0; n < a.width(); ++n) {
      const double av = a(m, n);
      if (av == 0.0) continue;
      for (std::size_t p = 0; p < b.height(); ++p) {
        double* row = out.data() + (m + p) * out.width() + n;
        const double* brow = b.data() + p * b.width();
        for (std::size_t q = 0; q < b.width(); ++q) row[q] += av * brow[q];
      }
    }
  }
  return out;
}

/// Sum of all entries, i.e. the DC coefficient of the grid's Fourier transform.
inline double grid_sum(const Grid2D& g) {
  double s = 0.0;
  for (double v : g.values()) s += v;
  return s;
}

/// Batched feature maps in pixel-major, channel-minor layout with a one-pixel
/// zero border around every plane. Viewed as a column-major C x columns matrix,
/// each 3x3 tap of a same-size convolution is a constant column offset, so a
/// layer is nine small GEMMs over contiguous memory.
struct FeatureBatch {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // padded storage; border entries stay zero

  FeatureBatch() = default;
  FeatureBatch(std::size_t b, std::size_t c, std::size_t h, std::size_t w)
      : batch(b), channels(c), height(h), width(w), values(b * c * (h + 2) * (w + 2), 0.0) {}

  std::size_t padded_width() const noexcept { return width + 2; }
  std::size_t padded_plane() const noexcept { return (height + 2) * (width + 2); }
  std::size_t columns() const noexcept { return batch * padded_plane(); }
  std::size_t column(std::size_t b, std::size_t y, std::size_t x) const noexcept {
    return b * padded_plane() + (y + 1) * padded_width() + x + 1;
  }
  double& at(std::size_t b, std::size_t y, std::size_t x, std::size_t c) { return values[column(b, y, x) * channels + c]; }
  double at(std::size_t b, std::size_t y, std::size_t x, std::size_t c) const {
    return values[column(b, y, x) * channels + c];
  }

  void clear_border() {
    const std::size_t pw = padded_width();
    const std::size_t ph = height + 2;
    for (std::size_t b = 0; b < batch; ++b) {
      double* plane = values.data() + b * padded_plane() * channels;
      std::fill(plane, plane + pw * channels, 0.0);
      std::fill(plane + (ph - 1) * pw * channels, plane + ph * pw * channels, 0.0);
      for (std::size_t y = 1; y + 1 < ph; ++y) {
        std::fill_n(plane + y * pw * channels, channels, 0.0);
        std::fill_n(plane + (y * pw + pw - 1) * channels, channels, 0.0);
      }
    }
  }
};

namespace detail {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

inline constexpr std::size_t kColumnChunk = 2048;

// Tap t = ky*3 + kx as a Cout x Cin matrix.
inline std::array<Matrix, 9> tap_matrices(const ConvLayerWeights& w) {
  std::array<Matrix, 9> taps;
  for (std::size_t t = 0; t < 9; ++t) {
    taps[t].resize(static_cast<Eigen::Index>(w.out_channels()), static_cast<Eigen::Index>(w.in_channels()));
    for (std::size_t o = 0; o < w.out_channels(); ++o)
      for (std::size_t i = 0; i < w.in_channels(); ++i)
        taps[t](static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) = w(o, i, t / 3, t % 3);
  }
  return taps;
}

// Output column q reads input column q + offset for tap t; the tap reads the
// pixel at (y + 1 - ky, x + 1 - kx), i.e. a true convolution.
inline std::ptrdiff_t tap_offset(std::size_t t, std::size_t padded_width) {
  return (1 - static_cast<std::ptrdiff_t>(t / 3)) * static_cast<std::ptrdiff_t>(padded_width) +
         (1 - static_cast<std::ptrdiff_t>(t % 3));
}

// Columns that can hold interior pixels, with every tap offset in range.
inline std::pair<std::size_t, std::size_t> active_columns(const FeatureBatch& f) {
  const std::size_t margin = f.padded_width() + 1;
  return {margin, f.columns() - margin};
}

}  // namespace detail

/// Same-size, zero-padded, bias-free multi-channel convolution on a batch.
inline FeatureBatch conv_same_batch(const FeatureBatch& in, const ConvLayerWeights& w) {
  if (in.channels != w.in_channels())
    throw ConfigError("conv_same: input has " + std::to_string(in.channels) + " channels, weights expect " +
                      std::to_string(w.in_channels()));
  FeatureBatch out(in.batch, w.out_channels(), in.height, in.width);
  const auto taps = detail::tap_matrices(w);
  const auto cin = static_cast<Eigen::Index>(in.channels);
  const auto cout = static_cast<Eigen::Index>(w.out_channels());
  const auto [lo, hi] = detail::active_columns(in);
  for (std::size_t first = lo; first < hi; first += detail::kColumnChunk) {
    const auto n = static_cast<Eigen::Index>(std::min(detail::kColumnChunk, hi - first));
    detail::MatrixMap dst(out.values.data() + first * w.out_channels(), cout, n);
    for (std::size_t t = 0; t < 9; ++t) {
      const std::size_t src = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(first) + detail::tap_offset(t, in.padded_width()));
      detail::ConstMatrixMap x(in.values.data() + src * in.channels, cin, n);
      dst.noalias() += taps[t] * x;
    }
  }
  out.clear_border();
  return out;
}

/// Gradients of a scalar loss through conv_same_batch. `grad_w` is accumulated
/// into (callers zero it), `grad_in` is returned; pass want_grad_in = false to
/// skip the input gradient for the first layer.
inline FeatureBatch conv_same_batch_backward(const FeatureBatch& in, const ConvLayerWeights& w,
                                             const FeatureBatch& grad_out, ConvLayerWeights& grad_w,
                                             bool want_grad_in = true) {
  if (in.channels != w.in_channels() || grad_out.channels != w.out_channels() || grad_out.batch != in.batch ||
      grad_out.height != in.height || grad_out.width != in.width)
    throw ConfigError("conv_same_backward: shape mismatch with forward pass");
  if (grad_w.out_channels() != w.out_channels() || grad_w.in_channels() != w.in_channels())
    throw ConfigError("conv_same_backward: gradient buffer shape mismatch");

  const auto taps = detail::tap_matrices(w);
  const auto cin = static_cast<Eigen::Index>(in.channels);
  const auto cout = static_cast<Eigen::Index>(w.out_channels());
  std::array<detail::Matrix, 9> gtaps;
  for (auto& g : gtaps) g = detail::Matrix::Zero(cout, cin);
  FeatureBatch grad_in;
  if (want_grad_in) grad_in = FeatureBatch(in.batch, in.channels, in.height, in.width);

  // Border columns of grad_out are zero, so sweeping every active column is exact.
  const auto [lo, hi] = detail::active_columns(in);
  for (std::size_t first = lo; first < hi; first += detail::kColumnChunk) {
    const auto n = static_cast<Eigen::Index>(std::min(detail::kColumnChunk, hi - first));
    detail::ConstMatrixMap g(grad_out.values.data() + first * w.out_channels(), cout, n);
    for (std::size_t t = 0; t < 9; ++t) {
      const std::size_t src = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(first) + detail::tap_offset(t, in.padded_width()));
      detail::ConstMatrixMap x(in.values.data() + src * in.channels, cin, n);
      gtaps[t].noalias() += g * x.transpose();
      if (want_grad_in) {
        detail::MatrixMap gx(grad_in.values.data() + src * in.channels, cin, n);
        gx.noalias() += taps[t].transpose() * g;
      }
    }
  }
  if (want_grad_in) grad_in.clear_border();
  for (std::size_t o = 0; o < w.out_channels(); ++o)
    for (std::size_t i = 0; i < w.in_channels(); ++i)
      for (std::size_t t = 0; t < 9; ++t)
        grad_w(o, i, t / 3, t % 3) += gtaps[t](static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i));
  return grad_in;
}

inline FeatureBatch to_feature_batch(const ChannelStack& s) {
  FeatureBatch f(1, s.channels(), s.height(), s.width());
  for (std::size_t c = 0; c < s.channels(); ++c)
    for (std::size_t y = 0; y < s.height(); ++y)
      for (std::size_t x = 0; x < s.width(); ++x) f.at(0, y, x, c) = s(c, y, x);
  return f;
}

inline ChannelStack to_channel_stack(const FeatureBatch& f, std::size_t b = 0) {
  ChannelStack s(f.channels, f.height, f.width);
  for (std::size_t c = 0; c < f.channels; ++c)
    for (std::size_t y = 0; y < f.height; ++y)
      for (std::size_t x = 0; x < f.width; ++x) s(c, y, x) = f.at(b, y, x, c);
  return s;
}

/// Cross-channel summed 3x3 convolution with one pixel of zero padding; the
/// spatial size is preserved.
inline ChannelStack conv2d_same(const ChannelStack& input, const ConvLayerWeights& w) {
  return to_channel_stack(conv_same_batch(to_feature_batch(input), w));
}

struct ConvGradients {
  ChannelStack grad_input;
  ConvLayerWeights grad_weights;
};

inline ConvGradients conv2d_same_backward(const ChannelStack& input, const ConvLayerWeights& w,
                                          const ChannelStack& grad_out) {
  if (grad_out.height() != input.height() || grad_out.width() != input.width())
    throw ConfigError("conv2d_same_backward: grad_out spatial size differs from input");
  ConvGradients g{ChannelStack{}, ConvLayerWeights(w.out_channels(), w.in_channels())};
  const FeatureBatch gi =
      conv_same_batch_backward(to_feature_batch(input), w, to_feature_batch(grad_out), g.grad_weights);
  g.grad_input = to_channel_stack(gi);
  return g;
}

}  // namespace nssr
