#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "nssr/lcnn.hpp"
#include "oracles.hpp"

using namespace nssr;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "nssr_lcnn_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

double max_abs(const Grid2D& g) {
  double m = 0.0;
  for (double v : g.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST(Lcnn, CanonicalParameterCount) {
  for (std::uint64_t seed : {0ull, 1ull, 12345ull}) EXPECT_EQ(param_count(init_model(seed)), 28224u);
  EXPECT_EQ(1 * 32 * 9 + 3 * (32 * 32 * 9) + 32 * 1 * 9, 28224);
  EXPECT_EQ(init_model(0).plan(), canonical_plan());
}

TEST(Lcnn, SingleLayerParameterCount) {
  EXPECT_EQ(param_count(init_model(0, {1, 1})), 9u);
}

TEST(Lcnn, BiasWouldBreakTheReportedCount) {
  // Adding one bias per output channel (32*4 + 1) moves the total away from
  // the 0.028M figure; the bias-free network is the one that matches.
  const std::size_t with_bias = param_count(init_model(0)) + 32 * 4 + 1;
  EXPECT_EQ(with_bias, 28353u);
  EXPECT_EQ(std::lround(param_count(init_model(0)) / 1000.0), 28);
}

TEST(Lcnn, InitIsDeterministic) {
  EXPECT_EQ(init_model(42), init_model(42));
  EXPECT_NE(init_model(42), init_model(43));
}

TEST(Lcnn, InitWeightsHaveZeroMean) {
  const LcnnModel m = init_model(7);
  double sum = 0.0;
  double var = 0.0;
  std::size_t n = 0;
  for (const auto& l : m.layers) {
    for (double v : l.values()) sum += v;
    var += static_cast<double>(l.size()) / static_cast<double>(l.in_channels() * 9);
    n += l.size();
  }
  const double mean = sum / static_cast<double>(n);
  const double se = std::sqrt(var) / static_cast<double>(n);
  EXPECT_LT(std::abs(mean), 3.0 * se);
  // Per-layer spread tracks 1/sqrt(fan_in).
  const auto& mid = m.layers[2];
  double ss = 0.0;
  for (double v : mid.values()) ss += v * v;
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(mid.size())), 1.0 / std::sqrt(288.0), 0.005);
}

TEST(Lcnn, ZeroInputGivesZeroOutput) {
  const Grid2D out = forward(init_model(1), Grid2D(13, 17));
  EXPECT_EQ(out.height(), 13u);
  EXPECT_EQ(out.width(), 17u);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Lcnn, ForwardIsLinear) {
  std::mt19937_64 rng(2);
  const LcnnModel m = init_model(3);
  for (int trial = 0; trial < 3; ++trial) {
    const Grid2D x = oracle::random_grid(19, 23, rng);
    const Grid2D y = oracle::random_grid(19, 23, rng);
    const double a = 1.7;
    const double b = -0.4;
    Grid2D mix(19, 23);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.values()[i] = a * x.values()[i] + b * y.values()[i];
    const Grid2D fx = forward(m, x);
    const Grid2D fy = forward(m, y);
    const Grid2D fm = forward(m, mix);
    Grid2D expect(19, 23);
    for (std::size_t i = 0; i < mix.size(); ++i) expect.values()[i] = a * fx.values()[i] + b * fy.values()[i];
    for (std::size_t i = 0; i < mix.size(); ++i)
      EXPECT_LE(std::abs(fm.values()[i] - expect.values()[i]), 1e-9 * max_abs(expect));

    Grid2D scaled = x;
    for (double& v : scaled.values()) v *= -3.25;
    const Grid2D fs = forward(m, scaled);
    for (std::size_t i = 0; i < fs.size(); ++i)
      EXPECT_LE(std::abs(fs.values()[i] + 3.25 * fx.values()[i]), 1e-10 * max_abs(fs));
  }
}

TEST(Lcnn, IdentityNetworkCollapsesToImpulse) {
  const Grid2D e = effective_kernel(identity_model());
  ASSERT_EQ(e.height(), 11u);
  ASSERT_EQ(e.width(), 11u);
  for (std::size_t i = 0; i < 11; ++i)
    for (std::size_t j = 0; j < 11; ++j) EXPECT_EQ(e(i, j), (i == 5 && j == 5) ? 1.0 : 0.0);
  std::mt19937_64 rng(1);
  const Grid2D x = oracle::random_grid(9, 14, rng);
  EXPECT_EQ(forward(identity_model(), x), x);
}

TEST(Lcnn, EffectiveKernelScalesWithFirstLayer) {
  LcnnModel m = init_model(5);
  const Grid2D base = effective_kernel(m);
  for (double& v : m.layers[0].values()) v *= 2.5;
  const Grid2D scaled = effective_kernel(m);
  for (std::size_t i = 0; i < base.size(); ++i)
    EXPECT_NEAR(scaled.values()[i], 2.5 * base.values()[i], 1e-12 * max_abs(scaled));
}

TEST(Lcnn, EffectiveKernelDcGainIsProductOfLayerGains) {
  const LcnnModel m = init_model(9);
  // Per-layer DC gain matrix G[o][i] = sum of taps; the network's DC gain is
  // their matrix product.
  std::vector<double> v{1.0};
  for (const auto& l : m.layers) {
    std::vector<double> next(l.out_channels(), 0.0);
    for (std::size_t o = 0; o < l.out_channels(); ++o)
      for (std::size_t i = 0; i < l.in_channels(); ++i) {
        double g = 0.0;
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) g += l(o, i, ky, kx);
        next[o] += g * v[i];
      }
    v = std::move(next);
  }
  EXPECT_NEAR(grid_sum(effective_kernel(m)), v[0], 1e-12 * std::max(1.0, std::abs(v[0])));
}

TEST(Lcnn, ForwardEqualsFullConvolutionWithEffectiveKernel) {
  std::mt19937_64 rng(4);
  const LcnnModel m = init_model(11);
  const Grid2D e = effective_kernel(m);
  const Grid2D core = oracle::random_grid(21, 21, rng);
  Grid2D x(31, 31);
  for (std::size_t i = 0; i < 21; ++i)
    for (std::size_t j = 0; j < 21; ++j) x(i + 5, j + 5) = core(i, j);
  const Grid2D net = forward(m, x);
  const Grid2D full = conv2d_full(core, e);
  ASSERT_EQ(full.height(), 31u);
  for (std::size_t i = 0; i < net.size(); ++i) EXPECT_NEAR(net.values()[i], full.values()[i], 1e-9);
}

TEST(Lcnn, CollapseEquivalenceAwayFromBorder) {
  std::mt19937_64 rng(6);
  const LcnnModel m = init_model(13);
  const Grid2D e = effective_kernel(m);
  const Grid2D x = oracle::random_grid(64, 64, rng);
  const Grid2D net = forward(m, x);
  const Grid2D full = conv2d_full(x, e);
  double worst = 0.0;
  for (std::size_t i = 5; i < 59; ++i)
    for (std::size_t j = 5; j < 59; ++j) worst = std::max(worst, std::abs(net(i, j) - full(i + 5, j + 5)));
  EXPECT_LE(worst, 1e-10);
}

TEST(Lcnn, TranslationEquivariantInInterior) {
  std::mt19937_64 rng(8);
  const LcnnModel m = init_model(15);
  const Grid2D x = oracle::random_grid(30, 30, rng);
  Grid2D shifted(30, 30);
  for (std::size_t i = 1; i < 30; ++i)
    for (std::size_t j = 1; j < 30; ++j) shifted(i, j) = x(i - 1, j - 1);
  const Grid2D a = forward(m, x);
  const Grid2D b = forward(m, shifted);
  for (std::size_t i = 7; i < 24; ++i)
    for (std::size_t j = 7; j < 24; ++j) EXPECT_NEAR(b(i + 1, j + 1), a(i, j), 1e-12);
}

TEST(LcnnCheckpoint, RoundTripPreservesModelAndOutputs) {
  LcnnModel m = init_model(21);
  m.provenance = {77, 12};
  const auto path = temp_file("model.ckpt");
  save_model(m, path);
  const LcnnModel back = load_model(path);
  EXPECT_EQ(back, m);
  std::mt19937_64 rng(3);
  const Grid2D x = oracle::random_grid(16, 16, rng);
  EXPECT_EQ(forward(back, x), forward(m, x));
  EXPECT_FALSE(load_checkpoint(path).optimizer.has_value());
}

TEST(LcnnCheckpoint, OptimizerStateRoundTrip) {
  const LcnnModel m = init_model(2);
  OptimizerSnapshot o;
  o.step = 314;
  o.first_moment.assign(param_count(m), 0.25);
  o.second_moment.assign(param_count(m), 1e-6);
  const auto path = temp_file("opt.ckpt");
  save_checkpoint({m, o}, path);
  const Checkpoint c = load_checkpoint(path);
  ASSERT_TRUE(c.optimizer.has_value());
  EXPECT_EQ(*c.optimizer, o);
  EXPECT_EQ(c.model, m);
}

TEST(LcnnCheckpoint, ArchitectureMismatchIsReported) {
  const auto path = temp_file("narrow.ckpt");
  save_model(init_model(1, {1, 16, 16, 16, 16, 1}), path);
  try {
    (void)load_model(path);
    FAIL() << "expected an architecture mismatch";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("architecture mismatch"), std::string::npos);
  }
  EXPECT_EQ(param_count(load_model(path, {1, 16, 16, 16, 16, 1})), 16u * 9 + 3 * 16 * 16 * 9 + 16 * 9);
  EXPECT_NO_THROW(load_model(path, {}));
}

TEST(LcnnCheckpoint, TruncatedCheckpoint) {
  const auto path = temp_file("cut.ckpt");
  save_model(init_model(1), path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 9);
  EXPECT_THROW(load_model(path), FormatError);
}
