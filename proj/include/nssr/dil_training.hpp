#pragma once

// Deep identity learning: train the linear CNN so that convolving any gallery
// kernel with it yields a discrete impulse, regularized so the collapsed
// inverse kernel has unit area and the network output peaks at 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "nssr/error.hpp"
#include "nssr/kernel_gallery.hpp"
#include "nssr/lcnn.hpp"
#include "nssr/random.hpp"

namespace nssr {

struct DilLossTerms {
  double identity_residual = 0.0;  // ||K * K^-1 - delta||^2
  double conv_area = 0.0;          // |1 - sum(effective kernel)|
  double center = 0.0;             // |1 - output at the center pixel|
  double total = 0.0;
};

struct LossWeights {
  double lambda1 = 0.8;  // area term
  double lambda2 = 0.2;  // center term
};

struct TrainConfig {
  std::uint64_t epochs = 50;
  double learning_rate = 0.1;
  std::uint64_t step_size = 20;  // epochs between learning-rate decays
  double gamma = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double lambda1 = 0.8;
  double lambda2 = 0.2;
  std::uint64_t batch_size = 32;
  std::uint64_t rng_seed = 0;

  // Optional run directory: config snapshot, history.jsonl, checkpoints.
  std::filesystem::path run_dir;
  std::uint64_t checkpoint_every = 10;  // 0 disables periodic checkpoints

  LossWeights weights() const { return {lambda1, lambda2}; }

  void validate() const {
    if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
    if (!(gamma > 0.0)) throw ParameterError("gamma must be positive");
    if (step_size == 0) throw ParameterError("step_size must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ParameterError("adam_beta1 must lie in [0,1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ParameterError("adam_beta2 must lie in [0,1)");
    if (!(adam_epsilon > 0.0)) throw ParameterError("adam_epsilon must be positive");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ParameterError("loss weights must be non-negative");
    if (batch_size == 0) throw ParameterError("batch_size must be positive");
  }

  double lr_at(std::uint64_t epoch) const {
    return learning_rate * std::pow(gamma, static_cast<double>(epoch / step_size));
  }
};

struct EpochRecord {
  std::uint64_t epoch = 0;  // 1-based
  double learning_rate = 0.0;
  DilLossTerms mean;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

namespace detail {

inline double sign_or_zero(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }

inline void add_into(std::vector<ConvLayerWeights>& acc, const std::vector<ConvLayerWeights>& g) {
  for (std::size_t l = 0; l < acc.size(); ++l) {
    auto a = acc[l].values();
    auto b = g[l].values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  }
}

}  // namespace detail

struct LossAndGradient {
  DilLossTerms terms;  // batch means
  std::vector<ConvLayerWeights> grads;
};

/// Batch-mean DIL loss and its exact gradient with respect to every weight.
/// The area term is evaluated on the network's impulse response, so its
/// gradient flows through a second forward pass on an impulse field.
inline LossAndGradient dil_loss_and_gradient(const LcnnModel& model, std::span<const Grid2D* const> kernels,
                                             const LossWeights& lw, bool want_gradient = true) {
  if (kernels.empty()) throw ConfigError("dil_loss: empty batch");
  const std::size_t size = kernels.front()->height();
  if (size % 2 == 0 || kernels.front()->width() != size) throw ConfigError("dil_loss: kernels must be odd squares");
  const std::size_t batch = kernels.size();
  const double inv_b = 1.0 / static_cast<double>(batch);

  LossAndGradient out;
  ForwardTrace trace = forward_traced(model, stack_grids(kernels));
  FeatureBatch grad_out(batch, 1, size, size);
  const std::size_t c0 = size / 2;
  double residual_sum = 0.0;
  double center_sum = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double r = 0.0;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double diff = trace.output.at(b, y, x, 0) - (y == c0 && x == c0 ? 1.0 : 0.0);
        r += diff * diff;
        grad_out.at(b, y, x, 0) = 2.0 * diff * inv_b;
      }
    }
    const double c = 1.0 - trace.output.at(b, c0, c0, 0);
    residual_sum += r;
    center_sum += std::abs(c);
    grad_out.at(b, c0, c0, 0) -= lw.lambda2 * detail::sign_or_zero(c) * inv_b;
  }

  const std::size_t field = impulse_field_size(model);
  const std::size_t support = 2 * model.radius() + 1;
  const std::size_t lo = (field - support) / 2;
  Grid2D impulse(field, field);
  impulse(field / 2, field / 2) = 1.0;
  const Grid2D* imp[] = {&impulse};
  ForwardTrace imp_trace = forward_traced(model, stack_grids(imp));
  double area = 0.0;
  for (std::size_t y = lo; y < lo + support; ++y)
    for (std::size_t x = lo; x < lo + support; ++x) area += imp_trace.output.at(0, y, x, 0);
  const double area_dev = 1.0 - area;

  out.terms.identity_residual = residual_sum * inv_b;
  out.terms.center = center_sum * inv_b;
  out.terms.conv_area = std::abs(area_dev);
  out.terms.total = out.terms.identity_residual + lw.lambda1 * out.terms.conv_area + lw.lambda2 * out.terms.center;

  if (!want_gradient) return out;
  out.grads = backward(model, trace, std::move(grad_out));
  const double area_slope = -lw.lambda1 * detail::sign_or_zero(area_dev);
  if (area_slope != 0.0) {
    FeatureBatch grad_imp(1, 1, field, field);
    for (std::size_t y = lo; y < lo + support; ++y)
      for (std::size_t x = lo; x < lo + support; ++x) grad_imp.at(0, y, x, 0) = area_slope;
    detail::add_into(out.grads, backward(model, imp_trace, std::move(grad_imp)));
  }
  return out;
}

/// Loss terms for a single kernel; the impulse target has the kernel's size.
inline DilLossTerms dil_loss(const LcnnModel& model, const DegradationKernel& k, const LossWeights& lw = {}) {
  const Grid2D* one[] = {&k.grid};
  return dil_loss_and_gradient(model, one, lw, false).terms;
}

/// Mean loss terms over a whole gallery, evaluated in fixed-size chunks.
inline DilLossTerms mean_gallery_loss(const LcnnModel& model, const KernelGallery& gallery, const LossWeights& lw,
                                      std::size_t chunk = 64) {
  if (gallery.kernels.empty()) throw ConfigError("mean_gallery_loss: empty gallery");
  DilLossTerms acc;
  std::vector<const Grid2D*> ptrs;
  for (std::size_t first = 0; first < gallery.kernels.size(); first += chunk) {
    const std::size_t n = std::min(chunk, gallery.kernels.size() - first);
    ptrs.clear();
    for (std::size_t k = 0; k < n; ++k) ptrs.push_back(&gallery.kernels[first + k].grid);
    const DilLossTerms t = dil_loss_and_gradient(model, ptrs, lw, false).terms;
    const double w = static_cast<double>(n);
    acc.identity_residual += t.identity_residual * w;
    acc.center += t.center * w;
    acc.conv_area = t.conv_area;
  }
  const double inv = 1.0 / static_cast<double>(gallery.kernels.size());
  acc.identity_residual *= inv;
  acc.center *= inv;
  acc.total = acc.identity_residual + lw.lambda1 * acc.conv_area + lw.lambda2 * acc.center;
  return acc;
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr,
                      const AdamConfig& cfg = {}) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ConfigError("adam_step: parameter, gradient and state sizes differ");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

inline std::vector<double> flatten(const std::vector<ConvLayerWeights>& layers) {
  std::vector<double> flat;
  for (const auto& l : layers) flat.insert(flat.end(), l.values().begin(), l.values().end());
  return flat;
}

inline void unflatten(std::span<const double> flat, std::vector<ConvLayerWeights>& layers) {
  std::size_t at = 0;
  for (auto& l : layers) {
    auto dst = l.values();
    if (at + dst.size() > flat.size()) throw ConfigError("unflatten: too few values");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(at), flat.begin() + static_cast<std::ptrdiff_t>(at + dst.size()), dst.begin());
    at += dst.size();
  }
  if (at != flat.size()) throw ConfigError("unflatten: too many values");
}

inline nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"lr", r.learning_rate},
          {"identity_residual", r.mean.identity_residual},
          {"conv_area", r.mean.conv_area},
          {"center", r.mean.center},
          {"total", r.mean.total},
          {"seconds", r.seconds}};
}

inline std::string config_snapshot(const TrainConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "epochs=" << c.epochs << "\nlr=" << c.learning_rate << "\nstep-size=" << c.step_size
    << "\ngamma=" << c.gamma << "\nbeta1=" << c.adam_beta1 << "\nbeta2=" << c.adam_beta2
    << "\nepsilon=" << c.adam_epsilon << "\nlambda1=" << c.lambda1 << "\nlambda2=" << c.lambda2
    << "\nbatch-size=" << c.batch_size << "\nseed=" << c.rng_seed << "\ncheckpoint-every=" << c.checkpoint_every
    << '\n';
  return s.str();
}

inline std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, std::uint64_t epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%04llu.ckpt", static_cast<unsigned long long>(epoch));
  return run_dir / name;
}

struct TrainResult {
  LcnnModel model;
  TrainHistory history;
  AdamState optimizer;
};

/// Called after every epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochRecord&, const LcnnModel&)>;

/// Minibatch Adam on the mean DIL loss over a fixed gallery. Training resumes
/// from model.provenance.epochs_completed; pass the saved optimizer snapshot
/// to continue a checkpointed run exactly. The epoch-e shuffle depends only on
/// (rng_seed, e), so the whole run is a pure function of its inputs.
inline TrainResult train(LcnnModel model, const KernelGallery& gallery, const TrainConfig& cfg,
                         std::optional<OptimizerSnapshot> resume = std::nullopt,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (gallery.kernels.empty()) throw ConfigError("train: gallery is empty");

  TrainResult result;
  const std::size_t n_params = param_count(model);
  result.optimizer = AdamState(n_params);
  if (resume) {
    if (resume->first_moment.size() != n_params || resume->second_moment.size() != n_params)
      throw ConfigError("train: optimizer snapshot does not match the model");
    result.optimizer.step = resume->step;
    result.optimizer.m = resume->first_moment;
    result.optimizer.v = resume->second_moment;
  }
  const AdamConfig adam{cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
  const LossWeights lw = cfg.weights();
  model.provenance.gallery_seed = gallery.seed;

  const bool write_run = !cfg.run_dir.empty();
  std::ofstream history_log;
  if (write_run) {
    std::filesystem::create_directories(cfg.run_dir);
    std::ofstream(cfg.run_dir / "config.ini") << config_snapshot(cfg);
    history_log.open(cfg.run_dir / "history.jsonl", model.provenance.epochs_completed > 0 ? std::ios::app : std::ios::trunc);
    if (!history_log) throw IoError("cannot write history in " + cfg.run_dir.string());
  }

  auto snapshot = [&]() {
    return Checkpoint{model, OptimizerSnapshot{result.optimizer.step, result.optimizer.m, result.optimizer.v}};
  };

  std::vector<std::size_t> order(gallery.kernels.size());
  std::vector<const Grid2D*> batch;
  std::vector<double> params = flatten(model.layers);
  for (std::uint64_t epoch = model.provenance.epochs_completed; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = cfg.lr_at(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.rng_seed, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    DilLossTerms sum;
    std::uint64_t batch_index = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - first);
      batch.clear();
      for (std::size_t k = 0; k < n; ++k) batch.push_back(&gallery.kernels[order[first + k]].grid);
      const LossAndGradient lg = dil_loss_and_gradient(model, batch, lw);
      if (!std::isfinite(lg.terms.total))
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch_index + 1));
      const double w = static_cast<double>(n);
      sum.identity_residual += lg.terms.identity_residual * w;
      sum.conv_area += lg.terms.conv_area * w;
      sum.center += lg.terms.center * w;
      sum.total += lg.terms.total * w;

      const std::vector<double> grads = flatten(lg.grads);
      adam_step(result.optimizer, params, grads, lr, adam);
      unflatten(params, model.layers);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.learning_rate = lr;
    const double inv = 1.0 / static_cast<double>(order.size());
    rec.mean = {sum.identity_residual * inv, sum.conv_area * inv, sum.center * inv, sum.total * inv};
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    model.provenance.epochs_completed = epoch + 1;
    result.history.epochs.push_back(rec);

    if (write_run) {
      history_log << to_json(rec).dump() << '\n' << std::flush;
      if (cfg.checkpoint_every != 0 && rec.epoch % cfg.checkpoint_every == 0)
        save_checkpoint(snapshot(), checkpoint_path(cfg.run_dir, rec.epoch));
    }
    if (on_epoch && !on_epoch(rec, model)) break;
  }
  if (write_run) save_checkpoint(snapshot(), cfg.run_dir / "final.ckpt");
  result.model = std::move(model);
  return result;
}

}  // namespace nssr
