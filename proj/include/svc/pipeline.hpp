#pragma once

// Inference: source audio -> f0 shift -> conditioning -> generator.

#include <filesystem>
#include <string>

#include "svc/audio.hpp"
#include "svc/config.hpp"
#include "svc/singer.hpp"
#include "svc/trainer.hpp"

namespace svc {

struct ConvertOptions {
  // Use the source clip's own f0 statistics instead of the registry's.
  bool utterance_stats = false;
};

struct Conversion {
  Waveform audio;          // 24 kHz, frames * hop samples
  F0Contour source_f0;     // tracker rate
  F0Contour shifted_f0;    // tracker rate, fed to the encoder
  F0Stats source_stats;    // statistics used as the shift source
  std::size_t clamped = 0;
  std::size_t frames = 0;  // conditioning frames
};

// Throws DataError("unknown singer") when the target id has no embedding
// row, and DataError when the source is too short to analyse.
Conversion convert(const RunConfig& cfg, const Model& model,
                   const Waveform& source, const SingerProfile& src,
                   const SingerProfile& tgt, const ConvertOptions& opt = {});

// Pearson correlation over frames voiced in both contours; NaN when fewer
// than two such frames or either side is constant.
double pearson_voiced(const F0Contour& a, const F0Contour& b);

struct EvalMetrics {
  double mel_l1 = 0.0;
  double f0_pearson_voiced = 0.0;
  std::size_t voiced_frames = 0;
};

// Converts `clip` back onto its own singer, re-tracks the output, and writes
// source_mel.pgm, output_mel.pgm, f0_overlay.svg, output.wav and
// metrics.json into out_dir (created if absent).
EvalMetrics eval_report(const RunConfig& cfg, const Model& model,
                        const Waveform& clip, int singer_id,
                        const std::filesystem::path& out_dir);

}  // namespace svc
