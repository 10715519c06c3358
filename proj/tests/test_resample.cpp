#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nssr/resample.hpp"
#include "oracles.hpp"

using namespace nssr;

TEST(CubicKernel, InterpolatingAndPartitionOfUnity) {
  EXPECT_EQ(cubic_kernel(0.0), 1.0);
  EXPECT_EQ(cubic_kernel(1.0), 0.0);
  EXPECT_EQ(cubic_kernel(-2.0), 0.0);
  EXPECT_EQ(cubic_kernel(2.5), 0.0);
  for (double u : {0.0, 0.1, 0.25, 0.5, 0.9}) {
    double s = 0.0;
    for (int j = -2; j <= 2; ++j) s += cubic_kernel(u - j);
    EXPECT_NEAR(s, 1.0, 1e-15);
  }
  // Keys: 1.5|x|^3 - 2.5|x|^2 + 1 on [0,1] for a = -0.5.
  EXPECT_NEAR(cubic_kernel(0.5), 1.5 * 0.125 - 2.5 * 0.25 + 1.0, 1e-15);
  EXPECT_NEAR(cubic_kernel(1.5), -0.5 * 3.375 + 2.5 * 2.25 - 4.0 * 1.5 + 2.0, 1e-15);
}

TEST(BicubicResize, SameSizeIsIdentity) {
  std::mt19937_64 rng(1);
  const ImageTensor img = oracle::random_image(9, 13, 3, rng);
  const ImageTensor out = bicubic_resize(img, 9, 13);
  for (std::size_t i = 0; i < img.values().size(); ++i) EXPECT_NEAR(out.values()[i], img.values()[i], 1e-15);
}

TEST(BicubicResize, ConstantImagesStayConstant) {
  const ImageTensor img(7, 5, 1, 0.37);
  for (auto [h, w] : {std::pair{14, 10}, std::pair{21, 15}, std::pair{3, 2}, std::pair{7, 40}}) {
    const ImageTensor out = bicubic_resize(img, static_cast<std::size_t>(h), static_cast<std::size_t>(w));
    for (double v : out.values()) EXPECT_NEAR(v, 0.37, 1e-15);
  }
}

TEST(BicubicResize, UpscaleMatchesDirectCubicConvolution) {
  std::mt19937_64 rng(2);
  const ImageTensor img = oracle::random_image(4, 4, 1, rng);
  const ImageTensor out = bicubic_resize(img, 8, 8);
  auto clampi = [](long v) { return static_cast<std::size_t>(std::clamp<long>(v, 0, 3)); };
  for (long y = 0; y < 8; ++y)
    for (long x = 0; x < 8; ++x) {
      const double u = (y + 0.5) / 2.0 - 0.5;
      const double v = (x + 0.5) / 2.0 - 0.5;
      double acc = 0.0;
      for (long m = static_cast<long>(std::floor(u)) - 1; m <= static_cast<long>(std::floor(u)) + 2; ++m)
        for (long n = static_cast<long>(std::floor(v)) - 1; n <= static_cast<long>(std::floor(v)) + 2; ++n)
          acc += cubic_kernel(u - m) * cubic_kernel(v - n) * img(clampi(m), clampi(n), 0);
      EXPECT_NEAR(out(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 0), acc, 1e-14);
    }
}

TEST(BicubicResize, LinearRampIsReproducedInInterior) {
  // Cubic convolution reproduces degree-1 polynomials exactly.
  ImageTensor img(1, 16, 1);
  for (std::size_t x = 0; x < 16; ++x) img(0, x, 0) = 0.05 * static_cast<double>(x);
  const ImageTensor out = bicubic_resize(img, 1, 48);
  for (std::size_t x = 6; x < 42; ++x) {
    const double src = (static_cast<double>(x) + 0.5) / 3.0 - 0.5;
    EXPECT_NEAR(out(0, x, 0), 0.05 * src, 1e-14);
  }
}

TEST(BicubicResize, DownscaleWeightsAreNormalized) {
  for (std::size_t n_in : {8u, 17u, 96u})
    for (std::size_t n_out : {1u, 3u, 4u}) {
      const ResampleTaps t = resample_taps(n_in, n_out);
      for (std::size_t i = 0; i < n_out; ++i) {
        double s = 0.0;
        for (std::size_t k = t.first[i]; k < t.first[i] + t.count[i]; ++k) {
          EXPECT_LT(t.index[k], n_in);
          s += t.weight[k];
        }
        EXPECT_NEAR(s, 1.0, 1e-14);
      }
    }
}

TEST(BicubicResize, RejectsEmpty) {
  EXPECT_THROW(bicubic_resize(ImageTensor(4, 4, 1), 0, 4), ParameterError);
  EXPECT_THROW(bicubic_resize(ImageTensor(), 4, 4), ParameterError);
}
