#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "nssr/binary_io.hpp"
#include "nssr/conv.hpp"
#include "nssr/error.hpp"
#include "nssr/grid.hpp"
#include "nssr/random.hpp"

namespace nssr {

/// Channel counts at each layer boundary; N+1 entries for N layers.
using ChannelPlan = std::vector<std::size_t>;

inline ChannelPlan canonical_plan() { return {1, 32, 32, 32, 32, 1}; }

struct TrainingProvenance {
  std::uint64_t gallery_seed = 0;
  std::uint64_t epochs_completed = 0;

  friend bool operator==(const TrainingProvenance&, const TrainingProvenance&) = default;
};

/// Stack of bias-free 3x3 convolutions with no activations between them. The
/// whole network is one linear shift-invariant operator.
struct LcnnModel {
  std::vector<ConvLayerWeights> layers;
  TrainingProvenance provenance;

  ChannelPlan plan() const {
    ChannelPlan p;
    if (layers.empty()) return p;
    p.push_back(layers.front().in_channels());
    for (const auto& l : layers) p.push_back(l.out_channels());
    return p;
  }

  /// Half-width of the receptive field: one pixel per 3x3 layer.
  std::size_t radius() const noexcept { return layers.size(); }

  friend bool operator==(const LcnnModel&, const LcnnModel&) = default;
};

inline std::size_t param_count(const LcnnModel& model) {
  std::size_t n = 0;
  for (const auto& l : model.layers) n += l.size();
  return n;
}

inline void validate_plan(const ChannelPlan& plan) {
  if (plan.size() < 2) throw ConfigError("channel plan needs at least one layer");
  if (plan.front() != 1 || plan.back() != 1) throw ConfigError("channel plan must map 1 channel to 1 channel");
  for (std::size_t c : plan)
    if (c == 0) throw ConfigError("channel plan has a zero-width layer");
}

/// Zero-mean Gaussian weights with per-layer standard deviation
/// 1/sqrt(in_channels * 9).
inline LcnnModel init_model(std::uint64_t seed, const ChannelPlan& plan = canonical_plan()) {
  validate_plan(plan);
  LcnnModel m;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < plan.size(); ++l) {
    ConvLayerWeights w(plan[l + 1], plan[l]);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(plan[l] * 9)));
    for (double& v : w.values()) v = dist(rng);
    m.layers.push_back(std::move(w));
  }
  return m;
}

/// Every layer routes channel i to channel i through a centered unit tap; the
/// network is the identity operator.
inline LcnnModel identity_model(const ChannelPlan& plan = canonical_plan()) {
  validate_plan(plan);
  LcnnModel m;
  for (std::size_t l = 0; l + 1 < plan.size(); ++l) {
    ConvLayerWeights w(plan[l + 1], plan[l]);
    for (std::size_t c = 0; c < std::min(plan[l], plan[l + 1]); ++c) w(c, c, 1, 1) = 1.0;
    m.layers.push_back(std::move(w));
  }
  return m;
}

/// Layer inputs recorded during a forward pass, consumed by backward().
struct ForwardTrace {
  std::vector<FeatureBatch> layer_inputs;
  FeatureBatch output;
};

inline ForwardTrace forward_traced(const LcnnModel& model, FeatureBatch input) {
  ForwardTrace t;
  t.layer_inputs.reserve(model.layers.size());
  for (const auto& layer : model.layers) {
    FeatureBatch next = conv_same_batch(input, layer);
    t.layer_inputs.push_back(std::move(input));
    input = std::move(next);
  }
  t.output = std::move(input);
  return t;
}

inline FeatureBatch forward_batch(const LcnnModel& model, FeatureBatch input) {
  for (const auto& layer : model.layers) input = conv_same_batch(input, layer);
  return input;
}

/// Per-layer weight gradients of a scalar loss, given dLoss/dOutput.
inline std::vector<ConvLayerWeights> backward(const LcnnModel& model, const ForwardTrace& trace,
                                              FeatureBatch grad_output) {
  std::vector<ConvLayerWeights> grads;
  grads.reserve(model.layers.size());
  for (const auto& l : model.layers) grads.emplace_back(l.out_channels(), l.in_channels());
  for (std::size_t k = model.layers.size(); k-- > 0;) {
    grad_output = conv_same_batch_backward(trace.layer_inputs[k], model.layers[k], grad_output, grads[k], k > 0);
  }
  return grads;
}

inline FeatureBatch stack_grids(std::span<const Grid2D* const> grids) {
  if (grids.empty()) throw ConfigError("stack_grids: empty batch");
  const std::size_t h = grids.front()->height();
  const std::size_t w = grids.front()->width();
  FeatureBatch f(grids.size(), 1, h, w);
  for (std::size_t b = 0; b < grids.size(); ++b) {
    if (grids[b]->height() != h || grids[b]->width() != w)
      throw ConfigError("stack_grids: grids in one batch must share a size");
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) f.at(b, y, x, 0) = (*grids[b])(y, x);
  }
  return f;
}

inline Grid2D unstack_grid(const FeatureBatch& f, std::size_t b) {
  if (f.channels != 1) throw ConfigError("unstack_grid: expected a single-channel batch");
  Grid2D g(f.height, f.width);
  for (std::size_t y = 0; y < f.height; ++y)
    for (std::size_t x = 0; x < f.width; ++x) g(y, x) = f.at(b, y, x, 0);
  return g;
}

/// Applies the network to a single-channel grid; output has the input's size.
inline Grid2D forward(const LcnnModel& model, const Grid2D& input) {
  if (input.empty()) throw ConfigError("forward: empty input");
  const Grid2D* one[] = {&input};
  return unstack_grid(forward_batch(model, stack_grids(one)), 0);
}

/// Side of the impulse field used to probe the network: large enough that the
/// per-layer zero padding never clips the impulse response.
inline std::size_t impulse_field_size(const LcnnModel& model) { return 4 * model.radius() + 1; }

inline Grid2D center_crop(const Grid2D& g, std::size_t h, std::size_t w) {
  if (h > g.height() || w > g.width()) throw ConfigError("center_crop: crop larger than grid");
  const std::size_t y0 = (g.height() - h) / 2;
  const std::size_t x0 = (g.width() - w) / 2;
  Grid2D out(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out(y, x) = g(y0 + y, x0 + x);
  return out;
}

/// The single kernel the network collapses to: its impulse response, cropped
/// to the (2*layers+1)^2 receptive field (11x11 for five layers).
inline Grid2D effective_kernel(const LcnnModel& model) {
  const std::size_t field = impulse_field_size(model);
  const std::size_t support = 2 * model.radius() + 1;
  Grid2D impulse(field, field);
  impulse(field / 2, field / 2) = 1.0;
  return center_crop(forward(model, impulse), support, support);
}

struct OptimizerSnapshot {
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  friend bool operator==(const OptimizerSnapshot&, const OptimizerSnapshot&) = default;
};

struct Checkpoint {
  LcnnModel model;
  std::optional<OptimizerSnapshot> optimizer;
};

inline constexpr std::uint32_t kModelVersion = 1;

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const LcnnModel& model = ckpt.model;
  binary::Writer w;
  w.header("LCNN", kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& l : model.layers) {
    w.u32(static_cast<std::uint32_t>(l.out_channels()));
    w.u32(static_cast<std::uint32_t>(l.in_channels()));
    w.u32(ConvLayerWeights::kKernel);
    w.u32(ConvLayerWeights::kKernel);
  }
  w.u64(model.provenance.gallery_seed);
  w.u64(model.provenance.epochs_completed);
  for (const auto& l : model.layers) w.f64s(l.values());
  w.u8(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    if (o.first_moment.size() != param_count(model) || o.second_moment.size() != param_count(model))
      throw ConfigError("save_checkpoint: optimizer state size differs from model");
    w.u64(o.step);
    w.f64s(o.first_moment);
    w.f64s(o.second_moment);
  }
  w.save(path);
}

inline void save_model(const LcnnModel& model, const std::filesystem::path& path) {
  save_checkpoint({model, std::nullopt}, path);
}

/// Reads a checkpoint and verifies its architecture against `expected`
/// (pass an empty plan to accept any architecture).
inline Checkpoint load_checkpoint(const std::filesystem::path& path, const ChannelPlan& expected = canonical_plan()) {
  auto r = binary::Reader::open(path);
  const std::uint32_t version = r.header("LCNN");
  if (version != kModelVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version), r.offset() - 4);

  const std::size_t arch_at = r.offset();
  const std::uint32_t layer_count = r.u32();
  if (layer_count == 0 || layer_count > 1024) throw FormatError("invalid layer count", arch_at);
  ChannelPlan plan;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  for (std::uint32_t k = 0; k < layer_count; ++k) {
    const std::size_t at = r.offset();
    const std::uint32_t out = r.u32();
    const std::uint32_t in = r.u32();
    const std::uint32_t kh = r.u32();
    const std::uint32_t kw = r.u32();
    if (kh != 3 || kw != 3) throw FormatError("only 3x3 layers are supported", at);
    if (out == 0 || in == 0 || out > 65536 || in > 65536) throw FormatError("invalid channel count", at);
    if (k == 0) plan.push_back(in);
    else if (plan.back() != in) throw FormatError("layer input width does not match previous output", at);
    plan.push_back(out);
    shapes.emplace_back(out, in);
  }
  if (!expected.empty() && plan != expected) {
    std::string got;
    for (std::size_t c : plan) got += (got.empty() ? "" : "-") + std::to_string(c);
    throw FormatError("architecture mismatch: checkpoint has channel plan " + got, arch_at);
  }

  Checkpoint ckpt;
  ckpt.model.provenance.gallery_seed = r.u64();
  ckpt.model.provenance.epochs_completed = r.u64();
  for (auto [out, in] : shapes) {
    ConvLayerWeights w(out, in);
    const auto vals = r.f64s(w.size());
    std::copy(vals.begin(), vals.end(), w.values().begin());
    ckpt.model.layers.push_back(std::move(w));
  }
  const std::size_t flag_at = r.offset();
  const std::uint8_t has_opt = r.u8();
  if (has_opt > 1) throw FormatError("invalid optimizer-state flag", flag_at);
  if (has_opt) {
    OptimizerSnapshot o;
    o.step = r.u64();
    o.first_moment = r.f64s(param_count(ckpt.model));
    o.second_moment = r.f64s(param_count(ckpt.model));
    ckpt.optimizer = std::move(o);
  }
  r.expect_end();
  return ckpt;
}

inline LcnnModel load_model(const std::filesystem::path& path, const ChannelPlan& expected = canonical_plan()) {
  return load_checkpoint(path, expected).model;
}

}  // namespace nssr
