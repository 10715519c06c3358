#pragma once

// Scores a model against the bicubic baseline on a synthetic evaluation set.
// Both outputs are quantized to 8 bits first, as they would be when saved.

#include <cstddef>
#include <span>
#include <vector>

#include "nssr/metrics.hpp"
#include "nssr/sr_pipeline.hpp"

namespace nssr {

struct ImageScores {
  MetricReport sr;
  MetricReport bicubic;
};

struct SetScores {
  std::vector<ImageScores> images;
  double sr_psnr = 0.0;  // means over images
  double sr_ssim = 0.0;
  double bicubic_psnr = 0.0;
  double bicubic_ssim = 0.0;

  double ssim_gain() const { return sr_ssim - bicubic_ssim; }
  double psnr_gain() const { return sr_psnr - bicubic_psnr; }
};

inline ImageTensor bicubic_baseline(const ImageTensor& lr, std::size_t s) {
  ImageTensor up = bicubic_upscale(lr, s);
  up.clamp01();
  return up;
}

/// Border crop equals the scale factor.
inline SetScores score_eval_set(const LcnnModel& model, std::span<const EvalTriple> set, std::size_t s,
                                bool collapse = false) {
  SetScores out;
  if (set.empty()) return out;
  const Grid2D effective = collapse ? effective_kernel(model) : Grid2D();
  for (const EvalTriple& t : set) {
    const ImageTensor sr = quantize_u8(collapse ? super_resolve_collapsed(effective, t.lr, s) : super_resolve(model, t.lr, s));
    const ImageTensor bc = quantize_u8(bicubic_baseline(t.lr, s));
    ImageScores sc{evaluate(sr, t.hr, s), evaluate(bc, t.hr, s)};
    out.sr_psnr += sc.sr.psnr_db;
    out.sr_ssim += sc.sr.ssim;
    out.bicubic_psnr += sc.bicubic.psnr_db;
    out.bicubic_ssim += sc.bicubic.ssim;
    out.images.push_back(sc);
  }
  const double n = static_cast<double>(set.size());
  out.sr_psnr /= n;
  out.sr_ssim /= n;
  out.bicubic_psnr /= n;
  out.bicubic_ssim /= n;
  return out;
}

}  // namespace nssr
