#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nssr/sr_pipeline.hpp"
#include "oracles.hpp"

using namespace nssr;

namespace {

double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  EXPECT_EQ(a.values().size(), b.values().size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

std::vector<ImageTensor> hr_set(std::size_t n, std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ImageTensor> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_image(side, side, 3, rng));
  return out;
}

}  // namespace

TEST(Degrade, ImpulseAtUnitScaleIsIdentity) {
  std::mt19937_64 rng(1);
  const ImageTensor hr = oracle::random_image(12, 10, 3, rng);
  EXPECT_EQ(degrade(hr, delta_target(21), 1), hr);
}

TEST(Degrade, ImpulseSubsamplesAtPhase) {
  std::mt19937_64 rng(2);
  const ImageTensor hr = oracle::random_image(12, 12, 1, rng);
  for (std::size_t s : {2u, 3u, 4u}) {
    const ImageTensor lr = degrade(hr, delta_target(5), s);
    ASSERT_EQ(lr.height(), 12 / s);
    for (std::size_t i = 0; i < lr.height(); ++i)
      for (std::size_t j = 0; j < lr.width(); ++j) EXPECT_EQ(lr(i, j, 0), hr(i * s + s / 2, j * s + s / 2, 0));
  }
}

TEST(Degrade, ConstantImageStaysConstant) {
  const ImageTensor hr(24, 24, 3, 0.42);
  const auto k = sample_anisotropic_gaussian({2.0, 4.5, 0.7}, 21);
  const ImageTensor lr = degrade(hr, k.grid, 4);
  for (double v : lr.values()) EXPECT_NEAR(v, 0.42, 1e-14);
}

TEST(Degrade, MatchesBruteForceBlurThenSubsample) {
  std::mt19937_64 rng(3);
  const ImageTensor hr = oracle::random_image(16, 16, 1, rng);
  const Grid2D k = sample_anisotropic_gaussian({1.5, 0.6, 0.9}, 21).grid;
  // Replicate-pad by 10, full-convolve, take the centered crop, subsample.
  Grid2D padded(36, 36);
  for (long y = 0; y < 36; ++y)
    for (long x = 0; x < 36; ++x)
      padded(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
          hr(static_cast<std::size_t>(std::clamp<long>(y - 10, 0, 15)), static_cast<std::size_t>(std::clamp<long>(x - 10, 0, 15)), 0);
  const Grid2D full = oracle::full_conv(padded, k);
  const ImageTensor lr = degrade(hr, k, 2);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(lr(i, j, 0), full(2 * i + 1 + 20, 2 * j + 1 + 20), 1e-14);
}

TEST(Degrade, NonDivisibleSizeIsRejected) {
  EXPECT_THROW(degrade(ImageTensor(10, 12, 1), delta_target(3), 4), ParameterError);
  EXPECT_THROW(degrade(ImageTensor(12, 12, 1), Grid2D(4, 4), 2), ParameterError);
}

TEST(SuperResolve, IdentityModelReducesToBicubic) {
  std::mt19937_64 rng(4);
  const ImageTensor lr = oracle::random_image(10, 9, 3, rng);
  for (std::size_t s : {2u, 3u}) {
    ImageTensor expect = bicubic_upscale(lr, s);
    expect.clamp01();
    EXPECT_LE(max_abs_diff(super_resolve(identity_model(), lr, s), expect), 1e-15);
  }
}

TEST(SuperResolve, ChannelsAreProcessedIndependently) {
  std::mt19937_64 rng(5);
  const ImageTensor lr = oracle::random_image(12, 12, 3, rng);
  const LcnnModel m = init_model(9);
  const ImageTensor out = apply_network(m, bicubic_upscale(lr, 2));
  // Permuting input channels permutes output channels.
  std::vector<Grid2D> perm{lr.plane(2), lr.plane(0), lr.plane(1)};
  const ImageTensor pout = apply_network(m, bicubic_upscale(ImageTensor::from_planes(perm), 2));
  EXPECT_EQ(pout.plane(0), out.plane(2));
  EXPECT_EQ(pout.plane(1), out.plane(0));
  EXPECT_EQ(pout.plane(2), out.plane(1));
  // A gray image gives the same plane as any single channel.
  const Grid2D g[] = {lr.plane(1)};
  EXPECT_EQ(apply_network(m, bicubic_upscale(ImageTensor::from_planes(g), 2)).plane(0), out.plane(1));
}

TEST(SuperResolve, NetworkAndCollapsedPathsAgree) {
  std::mt19937_64 rng(6);
  const LcnnModel m = init_model(10);
  const Grid2D e = effective_kernel(m);
  for (std::size_t s : {2u, 4u}) {
    const ImageTensor lr = oracle::random_image(17, 13, 3, rng);
    const ImageTensor up = bicubic_upscale(lr, s);
    EXPECT_LE(max_abs_diff(apply_network(m, up), apply_kernel(e, up)), 1e-10);
    EXPECT_LE(max_abs_diff(super_resolve(m, lr, s), super_resolve_collapsed(e, lr, s)), 1e-5);
  }
}

TEST(SuperResolve, OutputIsClampedAndSized) {
  std::mt19937_64 rng(7);
  const ImageTensor lr = oracle::random_image(6, 5, 1, rng);
  LcnnModel m = identity_model();
  for (double& v : m.layers[0].values()) v *= 5.0;
  const ImageTensor out = super_resolve(m, lr, 3);
  EXPECT_EQ(out.height(), 18u);
  EXPECT_EQ(out.width(), 15u);
  for (double v : out.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SuperResolve, NonFiniteOutputIsNumericError) {
  LcnnModel m = identity_model();
  m.layers[0](0, 0, 1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(super_resolve(m, ImageTensor(4, 4, 1, 0.5), 2), NumericError);
}

TEST(EvalKernels, UnseenKernelsAreNormalizedAndSized) {
  Rng rng(11);
  for (std::size_t s : {2u, 4u}) {
    const auto spec = EvalKernelSpec::unseen(s);
    for (int i = 0; i < 20; ++i) {
      const auto k = sample_eval_kernel(spec, rng);
      EXPECT_EQ(k.grid.height(), s <= 2 ? 11u : 21u);
      EXPECT_NEAR(grid_sum(k.grid), 1.0, 1e-12);
      EXPECT_GE(k.params.sigma1, 3.0);
      EXPECT_LT(k.params.sigma1, 5.0);
      for (double v : k.grid.values()) EXPECT_GE(v, 0.0);
    }
  }
}

TEST(EvalKernels, ZeroNoiseMatchesCleanSampler) {
  Rng a(12);
  Rng b(12);
  auto spec = EvalKernelSpec::unseen(4, 0.0);
  const auto k = sample_eval_kernel(spec, a);
  std::uniform_real_distribution<double> sigma(3.0, 5.0);
  std::uniform_real_distribution<double> theta(0.0, std::numbers::pi);
  GaussianParams p;
  p.sigma1 = sigma(b);
  p.sigma2 = sigma(b);
  p.theta = theta(b);
  EXPECT_EQ(k.grid, sample_anisotropic_gaussian(p, 21).grid);
  spec.noise = 1.5;
  EXPECT_THROW(sample_eval_kernel(spec, a), ParameterError);
}

TEST(SynthEvalSet, DeterministicAndOrderStable) {
  const auto hr = hr_set(3, 24, 13);
  const auto spec = EvalKernelSpec::in_distribution(2);
  const auto a = synth_eval_set(hr, spec, 2, 99);
  const auto b = synth_eval_set(hr, spec, 2, 99);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].lr, b[i].lr);
    EXPECT_EQ(a[i].kernel.grid, b[i].kernel.grid);
    EXPECT_EQ(a[i].lr.height(), 12u);
    for (double v : a[i].lr.values()) EXPECT_EQ(v, std::round(v * 255.0) / 255.0);
  }
  // Image i's kernel does not depend on how many images precede it.
  const std::vector<ImageTensor> tail{hr[0]};
  EXPECT_EQ(synth_eval_set(tail, spec, 2, 99)[0].kernel.grid, a[0].kernel.grid);
  EXPECT_NE(synth_eval_set(hr, spec, 2, 100)[0].kernel.grid, a[0].kernel.grid);
}

TEST(SynthEvalSet, CropsToScaleMultiple) {
  const auto hr = hr_set(1, 25, 14);
  const auto t = synth_eval_set(hr, EvalKernelSpec::in_distribution(4), 4, 1);
  EXPECT_EQ(t[0].hr.height(), 24u);
  EXPECT_EQ(t[0].lr.height(), 6u);
}
