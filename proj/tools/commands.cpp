#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nssr/nssr.hpp"
#include "nssr/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace nssr::cli {
namespace {

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("no PNG files in " + dir.string());
  return out;
}

std::vector<ImageTensor> read_pngs(const std::vector<fs::path>& paths) {
  std::vector<ImageTensor> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(read_png(p));
  return out;
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

json metric_json(const MetricReport& r) {
  json j;
  if (std::isinf(r.psnr_db))
    j["psnr"] = "inf";
  else
    j["psnr"] = r.psnr_db;
  j["ssim"] = r.ssim;
  return j;
}

std::size_t checked_scale(int s) {
  if (std::find(std::begin(kSupportedScales), std::end(kSupportedScales), s) == std::end(kSupportedScales))
    throw ParameterError("unsupported scale " + std::to_string(s) + " (expected one of 2, 3, 4, 8, 16, 32)");
  return static_cast<std::size_t>(s);
}

EvalKernelSpec kernel_spec(const std::string& kind, std::size_t s, double noise) {
  if (kind == "in-distribution") return EvalKernelSpec::in_distribution(s);
  if (kind == "unseen") return EvalKernelSpec::unseen(s, noise);
  throw ParameterError("unknown kernel set '" + kind + "' (expected in-distribution or unseen)");
}

// ---------------------------------------------------------------- manifest

struct ManifestEntry {
  std::string name;
  fs::path hr;
  fs::path lr;
  fs::path kernel;
  std::size_t scale = 0;
};

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      ManifestEntry e;
      e.name = j.at("name").get<std::string>();
      e.hr = j.at("hr").get<std::string>();
      e.lr = base / j.at("lr").get<std::string>();
      e.kernel = base / j.at("kernel").get<std::string>();
      e.scale = j.at("scale").get<std::size_t>();
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw FormatError("manifest " + path.string() + " line " + std::to_string(line_no) + ": " + ex.what(),
                        line_start);
    }
  }
  if (out.empty()) throw FormatError("manifest " + path.string() + " has no entries", 0);
  return out;
}

std::size_t manifest_scale(const std::vector<ManifestEntry>& entries, std::size_t flag_scale) {
  for (const auto& e : entries)
    if (e.scale != flag_scale)
      throw ParameterError("scale mismatch: manifest entry '" + e.name + "' was degraded at x" +
                           std::to_string(e.scale) + " but --scale is " + std::to_string(flag_scale));
  return flag_scale;
}

// ---------------------------------------------------------------- training

struct TrainOptions {
  TrainConfig cfg;
  std::uint64_t gallery_size = 0;  // 0 keeps the whole gallery
  bool quiet = false;
};

void add_train_options(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--epochs", o.cfg.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", o.cfg.learning_rate, "Initial Adam learning rate")->capture_default_str();
  cmd->add_option("--step-size", o.cfg.step_size, "Epochs between learning-rate decays")->capture_default_str();
  cmd->add_option("--gamma", o.cfg.gamma, "Learning-rate decay factor")->capture_default_str();
  cmd->add_option("--beta1", o.cfg.adam_beta1, "Adam first-moment decay")->capture_default_str();
  cmd->add_option("--beta2", o.cfg.adam_beta2, "Adam second-moment decay")->capture_default_str();
  cmd->add_option("--epsilon", o.cfg.adam_epsilon, "Adam epsilon")->capture_default_str();
  cmd->add_option("--batch-size", o.cfg.batch_size, "Kernels per minibatch")->capture_default_str();
  cmd->add_option("--lambda1", o.cfg.lambda1, "Weight of the kernel-area regularizer")->capture_default_str();
  cmd->add_option("--lambda2", o.cfg.lambda2, "Weight of the center-pixel regularizer")->capture_default_str();
  cmd->add_option("--gallery-size", o.gallery_size, "Train on the first N gallery kernels (0 = all)")
      ->capture_default_str();
  cmd->add_option("--checkpoint-every", o.cfg.checkpoint_every, "Checkpoint period in epochs (0 = final only)")
      ->capture_default_str();
  cmd->add_flag("--quiet", o.quiet, "Suppress per-epoch progress");
}

KernelGallery subset(const KernelGallery& g, std::uint64_t n) {
  if (n == 0) return g;
  if (n > g.kernels.size())
    throw ParameterError("--gallery-size " + std::to_string(n) + " exceeds the gallery's " +
                         std::to_string(g.kernels.size()) + " kernels");
  KernelGallery out = g;
  out.kernels.resize(n);
  out.config.count = n;
  return out;
}

EpochCallback progress(bool quiet, std::uint64_t total) {
  if (quiet) return {};
  return [total](const EpochRecord& r, const LcnnModel&) {
    std::fprintf(stderr, "epoch %llu/%llu  lr=%.3g  total=%.6g  residual=%.6g  area=%.6g  center=%.6g  (%.1fs)\n",
                 static_cast<unsigned long long>(r.epoch), static_cast<unsigned long long>(total), r.learning_rate,
                 r.mean.total, r.mean.identity_residual, r.mean.conv_area, r.mean.center, r.seconds);
    return true;
  };
}

/// Trains into `run_dir`, or resumes from its newest checkpoint when one
/// exists. Returns the final model.
LcnnModel train_or_resume(const KernelGallery& gallery, TrainOptions opts, std::uint64_t root_seed,
                          const fs::path& run_dir) {
  opts.cfg.run_dir = run_dir;
  opts.cfg.rng_seed = derive_seed(root_seed, "train");
  if (fs::exists(run_dir / "final.ckpt")) {
    Checkpoint done = load_checkpoint(run_dir / "final.ckpt");
    if (done.model.provenance.epochs_completed >= opts.cfg.epochs) return done.model;
  }
  std::optional<Checkpoint> latest;
  if (fs::is_directory(run_dir)) {
    std::vector<fs::path> ckpts;
    for (const auto& e : fs::directory_iterator(run_dir))
      if (e.path().extension() == ".ckpt") ckpts.push_back(e.path());
    std::uint64_t best = 0;
    for (const auto& p : ckpts) {
      Checkpoint c = load_checkpoint(p);
      if (c.model.provenance.epochs_completed > best && c.model.provenance.epochs_completed <= opts.cfg.epochs &&
          c.optimizer) {
        best = c.model.provenance.epochs_completed;
        latest = std::move(c);
      }
    }
  }
  const KernelGallery g = subset(gallery, opts.gallery_size);
  TrainResult r = latest ? train(latest->model, g, opts.cfg, latest->optimizer, progress(opts.quiet, opts.cfg.epochs))
                         : train(init_model(derive_seed(root_seed, "init")), g, opts.cfg, std::nullopt,
                                 progress(opts.quiet, opts.cfg.epochs));
  return r.model;
}

// ---------------------------------------------------------------- commands

struct GenGalleryArgs {
  fs::path out;
  GalleryConfig cfg;
  std::uint64_t seed = 0;
};

int cmd_gen_gallery(const GenGalleryArgs& a) {
  const KernelGallery g = generate_gallery(a.cfg, derive_seed(a.seed, "gallery"));
  save_gallery(g, a.out);
  if (g.kernels.empty()) {
    std::cerr << "warning: gallery is empty (--count 0)\n";
  }
  double s1 = 0.0, s2 = 0.0, smin = 1e300, smax = 0.0;
  for (const auto& k : g.kernels) {
    s1 += k.params.sigma1;
    s2 += k.params.sigma2;
    smin = std::min({smin, k.params.sigma1, k.params.sigma2});
    smax = std::max({smax, k.params.sigma1, k.params.sigma2});
  }
  json summary{{"path", a.out.string()},
               {"count", g.kernels.size()},
               {"kernel_size", g.config.kernel_size},
               {"seed", g.seed}};
  if (!g.kernels.empty()) {
    const double n = static_cast<double>(g.kernels.size());
    summary["mean_sigma1"] = s1 / n;
    summary["mean_sigma2"] = s2 / n;
    summary["min_sigma"] = smin;
    summary["max_sigma"] = smax;
  }
  std::cout << summary.dump() << '\n';
  return kOk;
}

struct TrainArgs {
  fs::path gallery;
  fs::path out_dir;
  fs::path resume;
  std::uint64_t seed = 0;
  TrainOptions opts;
};

int cmd_train(TrainArgs a) {
  const KernelGallery full = load_gallery(a.gallery);
  const KernelGallery g = subset(full, a.opts.gallery_size);
  if (g.kernels.empty()) throw ParameterError("cannot train on an empty gallery");
  a.opts.cfg.run_dir = a.out_dir;
  a.opts.cfg.rng_seed = derive_seed(a.seed, "train");
  LcnnModel model = init_model(derive_seed(a.seed, "init"));
  std::optional<OptimizerSnapshot> opt;
  if (!a.resume.empty()) {
    Checkpoint c = load_checkpoint(a.resume);
    model = std::move(c.model);
    opt = std::move(c.optimizer);
  }
  const LossWeights lw = a.opts.cfg.weights();
  const DilLossTerms before = mean_gallery_loss(model, g, lw);
  const TrainResult r = train(model, g, a.opts.cfg, opt, progress(a.opts.quiet, a.opts.cfg.epochs));
  const DilLossTerms after = mean_gallery_loss(r.model, g, lw);
  const Grid2D e = effective_kernel(r.model);
  json summary{{"checkpoint", (a.out_dir / "final.ckpt").string()},
               {"epochs_completed", r.model.provenance.epochs_completed},
               {"parameters", param_count(r.model)},
               {"initial_total", before.total},
               {"final_total", after.total},
               {"final_identity_residual", after.identity_residual},
               {"final_conv_area", after.conv_area},
               {"final_center", after.center},
               {"effective_kernel_sum", grid_sum(e)}};
  std::cout << summary.dump() << '\n';
  return kOk;
}

struct DegradeArgs {
  fs::path hr_dir;
  fs::path out_dir;
  int scale = 2;
  std::string kernels = "in-distribution";
  double noise = 0.25;
  std::uint64_t seed = 0;
};

int cmd_degrade(const DegradeArgs& a) {
  const std::size_t s = checked_scale(a.scale);
  const auto paths = list_pngs(a.hr_dir);
  const auto hr = read_pngs(paths);
  const auto set = synth_eval_set(hr, kernel_spec(a.kernels, s, a.noise), s, derive_seed(a.seed, "degrade"));
  make_dirs(a.out_dir / "lr");
  make_dirs(a.out_dir / "kernels");
  std::ofstream manifest = open_out(a.out_dir / "manifest.jsonl");
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::string name = paths[i].stem().string();
    const fs::path lr_rel = fs::path("lr") / (name + ".png");
    const fs::path k_rel = fs::path("kernels") / (name + ".kern");
    write_png(set[i].lr, a.out_dir / lr_rel);
    KernelGallery one;
    one.kernels = {set[i].kernel};
    one.config = kernel_spec(a.kernels, s, a.noise).ranges;
    one.config.count = 1;
    save_gallery(one, a.out_dir / k_rel);
    json rec{{"name", name},
             {"hr", fs::absolute(paths[i]).lexically_normal().string()},
             {"lr", lr_rel.string()},
             {"kernel", k_rel.string()},
             {"scale", s},
             {"sigma1", set[i].kernel.params.sigma1},
             {"sigma2", set[i].kernel.params.sigma2},
             {"theta", set[i].kernel.params.theta}};
    manifest << rec.dump() << '\n';
  }
  std::cout << json{{"manifest", (a.out_dir / "manifest.jsonl").string()}, {"images", set.size()}, {"scale", s}}.dump()
            << '\n';
  return kOk;
}

struct SrArgs {
  fs::path manifest;
  fs::path lr_dir;
  fs::path out_dir;
  fs::path checkpoint;
  bool identity = false;
  bool collapse = false;
  int scale = 2;
};

LcnnModel model_from(const fs::path& checkpoint, bool identity) {
  if (identity) return identity_model();
  if (checkpoint.empty()) throw ParameterError("either --checkpoint or --identity is required");
  return load_model(checkpoint);
}

int cmd_sr(const SrArgs& a) {
  const std::size_t s = checked_scale(a.scale);
  std::vector<fs::path> inputs;
  if (!a.manifest.empty()) {
    const auto entries = read_manifest(a.manifest);
    manifest_scale(entries, s);
    for (const auto& e : entries) inputs.push_back(e.lr);
  } else {
    inputs = list_pngs(a.lr_dir);
  }
  const LcnnModel model = model_from(a.checkpoint, a.identity);
  const Grid2D effective = effective_kernel(model);
  make_dirs(a.out_dir);
  for (const auto& p : inputs) {
    const ImageTensor lr = read_png(p);
    const ImageTensor sr = a.collapse ? super_resolve_collapsed(effective, lr, s) : super_resolve(model, lr, s);
    write_png(sr, a.out_dir / p.filename());
  }
  std::cout << json{{"out_dir", a.out_dir.string()}, {"images", inputs.size()}, {"scale", s},
                    {"collapse", a.collapse}, {"parameters", param_count(model)}}
                   .dump()
            << '\n';
  return kOk;
}

struct EvalArgs {
  fs::path manifest;
  fs::path sr_dir;
  fs::path out;
  int scale = 0;
  int crop = -1;
};

int cmd_eval(const EvalArgs& a) {
  const auto entries = read_manifest(a.manifest);
  const std::size_t s = a.scale > 0 ? manifest_scale(entries, checked_scale(a.scale)) : entries.front().scale;
  manifest_scale(entries, s);
  const std::size_t crop = a.crop >= 0 ? static_cast<std::size_t>(a.crop) : s;
  const fs::path out_path = a.out.empty() ? a.sr_dir / "metrics.jsonl" : a.out;
  std::ofstream out = open_out(out_path);
  double sr_ssim = 0, bc_ssim = 0, sr_psnr = 0, bc_psnr = 0;
  for (const auto& e : entries) {
    const ImageTensor hr = read_png(e.hr).cropped_to_multiple(s);
    const ImageTensor lr = read_png(e.lr);
    const ImageTensor sr = read_png(a.sr_dir / e.lr.filename());
    if (sr.height() != hr.height() || sr.width() != hr.width())
      throw ParameterError("SR image " + e.name + " is " + std::to_string(sr.height()) + "x" +
                           std::to_string(sr.width()) + ", expected " + std::to_string(hr.height()) + "x" +
                           std::to_string(hr.width()));
    const ImageTensor bc = quantize_u8(bicubic_baseline(lr, s));
    const MetricReport m_sr = evaluate(sr, hr, crop);
    const MetricReport m_bc = evaluate(bc, hr, crop);
    json rec{{"image", e.name}, {"scale", s}, {"crop", crop}, {"sr", metric_json(m_sr)},
             {"bicubic", metric_json(m_bc)}, {"ssim_gain", m_sr.ssim - m_bc.ssim}};
    out << rec.dump() << '\n';
    sr_ssim += m_sr.ssim;
    bc_ssim += m_bc.ssim;
    sr_psnr += m_sr.psnr_db;
    bc_psnr += m_bc.psnr_db;
  }
  const double n = static_cast<double>(entries.size());
  json summary{{"images", entries.size()},       {"scale", s},
               {"mean_sr_ssim", sr_ssim / n},    {"mean_bicubic_ssim", bc_ssim / n},
               {"mean_ssim_gain", (sr_ssim - bc_ssim) / n}, {"mean_sr_psnr", sr_psnr / n},
               {"mean_bicubic_psnr", bc_psnr / n}, {"records", out_path.string()}};
  std::cout << summary.dump() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- ablation

struct AblateArgs {
  fs::path out_dir;
  fs::path hr_dir;
  fs::path checkpoint;
  std::vector<std::uint64_t> gallery_sizes;
  std::vector<int> scales;
  std::vector<std::string> variants;
  int eval_scale = 2;
  std::uint64_t seed = 0;
  TrainOptions opts;
};

struct Variant {
  std::string name;
  double lambda1;
  double lambda2;
};

Variant variant_named(const std::string& name, const TrainConfig& base) {
  if (name == "full") return {name, base.lambda1, base.lambda2};
  if (name == "identity") return {name, 0.0, 0.0};
  if (name == "area") return {name, base.lambda1, 0.0};
  if (name == "center") return {name, 0.0, base.lambda2};
  throw ParameterError("unknown loss variant '" + name + "' (expected full, identity, area or center)");
}

json scores_json(const SetScores& sc) {
  return {{"sr_ssim", sc.sr_ssim},           {"bicubic_ssim", sc.bicubic_ssim}, {"ssim_gain", sc.ssim_gain()},
          {"sr_psnr", sc.sr_psnr},           {"bicubic_psnr", sc.bicubic_psnr}, {"psnr_gain", sc.psnr_gain()}};
}

int cmd_ablate(AblateArgs a) {
  if (a.gallery_sizes.empty() && a.scales.empty() && a.variants.empty())
    throw ParameterError("empty sweep: give --gallery-sizes, --scales and/or --variants");
  for (int s : a.scales) checked_scale(s);
  std::vector<Variant> variants;
  for (const auto& v : a.variants) variants.push_back(variant_named(v, a.opts.cfg));
  const std::size_t eval_s = checked_scale(a.eval_scale);
  const auto hr = read_pngs(list_pngs(a.hr_dir));
  make_dirs(a.out_dir);

  std::uint64_t full_count = GalleryConfig{}.count;
  for (auto n : a.gallery_sizes) full_count = std::max(full_count, n);
  GalleryConfig gcfg;
  gcfg.count = full_count;
  std::unique_ptr<KernelGallery> gallery;
  auto get_gallery = [&]() -> const KernelGallery& {
    if (!gallery) gallery = std::make_unique<KernelGallery>(generate_gallery(gcfg, derive_seed(a.seed, "gallery")));
    return *gallery;
  };
  const std::uint64_t eval_seed = derive_seed(a.seed, "eval");

  json legs = json::array();
  int failures = 0;
  auto run_leg = [&](const std::string& name, const std::function<json()>& body) {
    const fs::path leg_dir = a.out_dir / "legs" / name;
    const fs::path result = leg_dir / "result.json";
    json rec;
    if (fs::exists(result)) {
      std::ifstream(result) >> rec;
      rec["resumed"] = true;
    } else {
      try {
        make_dirs(leg_dir);
        rec = body();
        rec["leg"] = name;
        rec["status"] = "ok";
        open_out(result) << rec.dump() << '\n';
      } catch (const std::exception& e) {
        rec = {{"leg", name}, {"status", "failed"}, {"error", e.what()}};
        ++failures;
        std::cerr << "leg " << name << " failed: " << e.what() << '\n';
      }
    }
    legs.push_back(rec);
  };

  auto trained = [&](const std::string& leg, std::uint64_t gallery_size, const Variant& v) {
    TrainOptions o = a.opts;
    o.gallery_size = gallery_size;
    o.cfg.lambda1 = v.lambda1;
    o.cfg.lambda2 = v.lambda2;
    return train_or_resume(get_gallery(), o, a.seed, a.out_dir / "legs" / leg / "run");
  };
  auto evaluate_at = [&](const LcnnModel& m, std::size_t s) {
    const auto set = synth_eval_set(hr, EvalKernelSpec::in_distribution(s), s, derive_seed(eval_seed, s));
    return score_eval_set(m, set, s, true);
  };
  const Variant full = variant_named("full", a.opts.cfg);

  for (auto n : a.gallery_sizes) {
    const std::string name = "gallery-" + std::to_string(n);
    run_leg(name, [&] {
      const LcnnModel m = trained(name, n, full);
      const KernelGallery g = subset(get_gallery(), n);
      const DilLossTerms loss = mean_gallery_loss(m, g, a.opts.cfg.weights());
      json j = scores_json(evaluate_at(m, eval_s));
      j["sweep"] = "gallery-size";
      j["gallery_size"] = n;
      j["scale"] = eval_s;
      j["final_total"] = loss.total;
      j["final_identity_residual"] = loss.identity_residual;
      return j;
    });
  }
  for (const auto& v : variants) {
    const std::string name = "loss-" + v.name;
    run_leg(name, [&] {
      const LcnnModel m = trained(name, 0, v);
      const DilLossTerms loss = mean_gallery_loss(m, get_gallery(), a.opts.cfg.weights());
      json j = scores_json(evaluate_at(m, eval_s));
      j["sweep"] = "loss-variant";
      j["variant"] = v.name;
      j["lambda1"] = v.lambda1;
      j["lambda2"] = v.lambda2;
      j["scale"] = eval_s;
      j["final_identity_residual"] = loss.identity_residual;
      j["effective_kernel_sum"] = grid_sum(effective_kernel(m));
      return j;
    });
  }
  if (!a.scales.empty()) {
    std::optional<LcnnModel> base;
    auto base_model = [&]() -> const LcnnModel& {
      if (!base) base = a.checkpoint.empty() ? trained("base", 0, full) : load_model(a.checkpoint);
      return *base;
    };
    for (int s : a.scales) {
      const std::string name = "scale-" + std::to_string(s);
      run_leg(name, [&] {
        const LcnnModel& m = base_model();
        json j = scores_json(evaluate_at(m, static_cast<std::size_t>(s)));
        j["sweep"] = "scale";
        j["scale"] = s;
        j["kernel_size"] = GalleryConfig::for_scale(s).kernel_size;
        j["parameters"] = param_count(m);
        return j;
      });
    }
  }

  std::ofstream report = open_out(a.out_dir / "report.jsonl");
  for (const auto& l : legs) report << l.dump() << '\n';

  std::cout << std::left << std::setw(22) << "leg" << std::setw(9) << "status" << std::right << std::setw(10)
            << "SSIM" << std::setw(10) << "bicubic" << std::setw(10) << "gain" << std::setw(10) << "PSNR" << '\n';
  std::cout << std::fixed;
  for (const auto& l : legs) {
    std::cout << std::left << std::setw(22) << l.value("leg", "?") << std::setw(9) << l.value("status", "?")
              << std::right;
    if (l.value("status", "") == "ok")
      std::cout << std::setprecision(4) << std::setw(10) << l.value("sr_ssim", 0.0) << std::setw(10)
                << l.value("bicubic_ssim", 0.0) << std::setw(10) << l.value("ssim_gain", 0.0) << std::setprecision(2)
                << std::setw(10) << l.value("sr_psnr", 0.0);
    else
      std::cout << "  " << l.value("error", "");
    std::cout << '\n';
  }
  return failures == 0 ? kOk : kFailure;
}

}  // namespace

std::function<int()> register_commands(CLI::App& app) {
  auto selected = std::make_shared<std::function<int()>>();

  {
    auto a = std::make_shared<GenGalleryArgs>();
    auto* cmd = app.add_subcommand("gen-gallery", "Sample a random kernel gallery and write it to a file");
    cmd->add_option("--out,-o", a->out, "Output gallery file")->required();
    cmd->add_option("--count", a->cfg.count, "Number of kernels")->capture_default_str();
    cmd->add_option("--size", a->cfg.kernel_size, "Kernel side length (odd)")->capture_default_str();
    cmd->add_option("--sigma-min", a->cfg.sigma_min, "Smallest Gaussian sigma")->capture_default_str();
    cmd->add_option("--sigma-max", a->cfg.sigma_max, "Largest Gaussian sigma")->capture_default_str();
    cmd->add_option("--seed", a->seed, "Root seed")->capture_default_str();
    cmd->callback([a, selected] {
      *selected = [a] {
        a->cfg.validate();
        return cmd_gen_gallery(*a);
      };
    });
  }
  {
    auto a = std::make_shared<TrainArgs>();
    auto* cmd = app.add_subcommand("train", "Train the linear CNN on a kernel gallery");
    cmd->add_option("--gallery,-g", a->gallery, "Gallery file from gen-gallery")->required();
    cmd->add_option("--out-dir,-o", a->out_dir, "Run directory (history, checkpoints)")->required();
    cmd->add_option("--resume", a->resume, "Continue from this checkpoint");
    cmd->add_option("--seed", a->seed, "Root seed")->capture_default_str();
    add_train_options(cmd, a->opts);
    cmd->callback([a, selected] {
      *selected = [a] {
        a->opts.cfg.validate();
        return cmd_train(*a);
      };
    });
  }
  {
    auto a = std::make_shared<DegradeArgs>();
    auto* cmd = app.add_subcommand("degrade", "Blur and subsample HR PNGs into an LR set with a manifest");
    cmd->add_option("--hr-dir", a->hr_dir, "Directory of HR PNG images")->required();
    cmd->add_option("--out-dir,-o", a->out_dir, "Output directory")->required();
    cmd->add_option("--scale,-s", a->scale, "Scale factor (2, 3, 4, 8, 16, 32)")->capture_default_str();
    cmd->add_option("--kernels", a->kernels, "Kernel set: in-distribution or unseen")->capture_default_str();
    cmd->add_option("--noise", a->noise, "Multiplicative noise amplitude for unseen kernels")->capture_default_str();
    cmd->add_option("--seed", a->seed, "Root seed")->capture_default_str();
    cmd->callback([a, selected] { *selected = [a] { return cmd_degrade(*a); }; });
  }
  {
    auto a = std::make_shared<SrArgs>();
    auto* cmd = app.add_subcommand("sr", "Super-resolve LR images with a trained checkpoint");
    auto* man = cmd->add_option("--manifest", a->manifest, "Manifest written by degrade");
    auto* dir = cmd->add_option("--lr-dir", a->lr_dir, "Directory of LR PNG images");
    man->excludes(dir);
    cmd->add_option("--out-dir,-o", a->out_dir, "Output directory")->required();
    auto* ck = cmd->add_option("--checkpoint,-c", a->checkpoint, "Model checkpoint");
    auto* id = cmd->add_flag("--identity", a->identity, "Use the identity network (bicubic only)");
    ck->excludes(id);
    cmd->add_flag("--collapse", a->collapse, "Convolve with the collapsed effective kernel");
    cmd->add_option("--scale,-s", a->scale, "Scale factor")->required();
    cmd->callback([a, selected] {
      if (a->manifest.empty() && a->lr_dir.empty()) throw CLI::ValidationError("sr", "--manifest or --lr-dir is required");
      *selected = [a] { return cmd_sr(*a); };
    });
  }
  {
    auto a = std::make_shared<EvalArgs>();
    auto* cmd = app.add_subcommand("eval", "Score SR outputs and the bicubic baseline against HR images");
    cmd->add_option("--manifest", a->manifest, "Manifest written by degrade")->required();
    cmd->add_option("--sr-dir", a->sr_dir, "Directory of SR outputs")->required();
    cmd->add_option("--out,-o", a->out, "Metric records file (default <sr-dir>/metrics.jsonl)");
    cmd->add_option("--scale,-s", a->scale, "Expected scale factor (default: from manifest)");
    cmd->add_option("--crop", a->crop, "Border crop in pixels (default: the scale factor)");
    cmd->callback([a, selected] { *selected = [a] { return cmd_eval(*a); }; });
  }
  {
    auto a = std::make_shared<AblateArgs>();
    auto* cmd = app.add_subcommand("ablate", "Run gallery-size, loss-variant and scale sweeps");
    cmd->add_option("--out-dir,-o", a->out_dir, "Sweep directory; rerunning resumes finished legs")->required();
    cmd->add_option("--hr-dir", a->hr_dir, "Directory of HR PNG images for evaluation")->required();
    cmd->add_option("--checkpoint,-c", a->checkpoint, "Model for the scale sweep (default: train one)");
    cmd->add_option("--gallery-sizes", a->gallery_sizes, "Gallery sizes to train on")->delimiter(',');
    cmd->add_option("--scales", a->scales, "Scale factors to evaluate one model at")->delimiter(',');
    cmd->add_option("--variants", a->variants, "Loss variants: full, identity, area, center")->delimiter(',');
    cmd->add_option("--eval-scale", a->eval_scale, "Scale for gallery-size and loss-variant legs")
        ->capture_default_str();
    cmd->add_option("--seed", a->seed, "Root seed")->capture_default_str();
    add_train_options(cmd, a->opts);
    cmd->callback([a, selected] {
      *selected = [a] {
        a->opts.cfg.validate();
        return cmd_ablate(*a);
      };
    });
  }

  return [selected] {
    if (!*selected) return static_cast<int>(kUsage);
    return (*selected)();
  };
}

}  // namespace nssr::cli
