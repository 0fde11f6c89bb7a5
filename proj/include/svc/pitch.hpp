#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "svc/audio.hpp"

namespace svc {

// Per-frame f0 in Hz. Unvoiced frames hold 0.
struct F0Contour {
  std::vector<double> values;
  std::vector<std::uint8_t> voiced;
  double frame_rate = 200.0;

  std::size_t size() const { return values.size(); }
  std::size_t voiced_count() const;
};

// YIN-style tracker settings.
struct TrackerConfig {
  double fmin = 50.0;
  double fmax = 800.0;
  double threshold = 0.15;      // aperiodicity (CMNDF) threshold
  double window_seconds = 0.04; // analysis window
  double frame_rate = 200.0;
};

// One frame per 1/frame_rate seconds, frame t centred on sample t*hop with
// zero padding at the clip edges; ceil(len/hop) frames, or none when the clip
// is shorter than one analysis window.
F0Contour extract_f0(const Waveform& w, const TrackerConfig& cfg = {});

struct F0Stats {
  double mean = 0.0;
  double std = 0.0;  // population (n-denominator) standard deviation
  std::size_t voiced_frames = 0;
};

// Pooled statistics over the voiced frames of all contours. Throws DataError
// ("insufficient voiced frames") below two voiced frames.
F0Stats compute_stats(std::span<const F0Contour> contours);
F0Stats compute_stats(const F0Contour& contour);

// z-score, clamp to [-3, 3], map affinely to [0, 1]. Unvoiced frames map to
// std::nullopt. Throws std::invalid_argument when stats.std == 0.
std::vector<std::optional<double>> normalize_f0(const F0Contour& c,
                                                const F0Stats& stats);

// Bin 0 is reserved for unvoiced frames; voiced frames use
// 1 + round(norm * (levels - 2)) in [1, levels - 1].
struct QuantizedF0 {
  std::vector<int> bins;
  int levels = 0;
};

QuantizedF0 quantize_f0(std::span<const std::optional<double>> normalized,
                        int levels);

// Normalized value at the centre of a voiced bin.
double bin_center(int bin, int levels);

// Keeps every `factor`-th frame (frame rate divided by factor).
F0Contour decimate(const F0Contour& c, int factor);

// f0 cache: `path` holds count little-endian float32 values followed by count
// uint8 voicing flags; `path` + ".json" holds
// {frame_rate, range, tracker_params, count}.
void save_f0_cache(const F0Contour& c, const TrackerConfig& cfg,
                   const std::filesystem::path& path);
F0Contour load_f0_cache(const std::filesystem::path& path);

}  // namespace svc
