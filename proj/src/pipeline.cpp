#include "svc/pipeline.hpp"

#include <cmath>
#include <limits>

#include "svc/error.hpp"
#include "svc/nn/ops.hpp"

namespace svc {

Conversion convert(const RunConfig& cfg, const Model& model,
                   const Waveform& source, const SingerProfile& src,
                   const SingerProfile& tgt, const ConvertOptions& opt) {
  if (tgt.id < 0 || static_cast<std::size_t>(tgt.id) >= model.singers.singers())
    throw DataError("unknown singer: target id " + std::to_string(tgt.id) +
                    " has no embedding (model holds " +
                    std::to_string(model.singers.singers()) + " singers)");
  if (!(cfg.normalization.std > 0.0))
    throw ConfigError("normalization stats missing from config");

  Conversion out;
  TrainingClip clip;
  clip.audio = resample(source, cfg.sample_rate);
  clip.singer_id = tgt.id;
  out.source_f0 = extract_f0(clip.audio, cfg.tracker);
  if (out.source_f0.size() == 0)
    throw DataError("source clip is shorter than one analysis window");
  out.source_stats = opt.utterance_stats ? compute_stats(out.source_f0) : src.stats;
  ShiftedContour shifted = shift_f0(out.source_f0, out.source_stats, tgt.stats,
                                    cfg.tracker.fmin, cfg.tracker.fmax);
  out.shifted_f0 = shifted.contour;
  out.clamped = shifted.clamped;
  clip.f0 = out.shifted_f0;
  clip.content = cfg.content.provide(clip.audio);

  const PreparedClip p = prepare_clip(cfg, clip, cfg.normalization);
  out.frames = p.frames;
  nn::NoGradGuard ng;
  const nn::Tensor wave =
      model.generator.forward(clip_conditioning(model, p, 0, p.frames));
  out.audio.sample_rate = cfg.sample_rate;
  out.audio.samples.assign(wave.data().begin(), wave.data().end());
  return out;
}

double pearson_voiced(const F0Contour& a, const F0Contour& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double sa = 0, sb = 0;
  std::size_t k = 0;
  for (std::size_t t = 0; t < n; ++t)
    if (a.voiced[t] && b.voiced[t]) {
      sa += a.values[t];
      sb += b.values[t];
      ++k;
    }
  if (k < 2) return std::numeric_limits<double>::quiet_NaN();
  const double ma = sa / k, mb = sb / k;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t t = 0; t < n; ++t)
    if (a.voiced[t] && b.voiced[t]) {
      const double da = a.values[t] - ma, db = b.values[t] - mb;
      cov += da * db;
      va += da * da;
      vb += db * db;
    }
  if (va == 0.0 || vb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return cov / std::sqrt(va * vb);
}

}  // namespace svc
