#include "svc/pitch.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "svc/error.hpp"
#include "svc/kernels.hpp"

namespace svc {

std::size_t F0Contour::voiced_count() const {
  return static_cast<std::size_t>(std::count(voiced.begin(), voiced.end(), 1));
}

F0Contour extract_f0(const Waveform& w, const TrackerConfig& cfg) {
  if (w.sample_rate < 16000)
    throw std::invalid_argument("extract_f0: sample rate must be >= 16 kHz");
  if (!(cfg.fmin > 0.0 && cfg.fmax > cfg.fmin))
    throw std::invalid_argument("extract_f0: invalid f0 range");
  const double sr = w.sample_rate;
  const double hop_f = sr / cfg.frame_rate;
  const auto hop = static_cast<std::size_t>(std::lround(hop_f));
  if (std::abs(hop_f - static_cast<double>(hop)) > 1e-9)
    throw std::invalid_argument("extract_f0: frame rate must divide sample rate");

  F0Contour c;
  c.frame_rate = cfg.frame_rate;
  const auto window = static_cast<std::size_t>(std::lround(cfg.window_seconds * sr));
  const auto max_lag = static_cast<std::size_t>(std::ceil(sr / cfg.fmin));
  const auto min_lag = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(sr / cfg.fmax)));
  if (window <= max_lag)
    throw std::invalid_argument("extract_f0: window too short for fmin");
  if (w.size() < window) return c;

  const std::size_t frames = (w.size() + hop - 1) / hop;
  kernels::YinGeom g;
  g.frames = frames;
  g.hop = hop;
  // Each lag compares pairs centred on the frame, so a gliding pitch is not
  // reported late.
  g.window = window - max_lag;
  g.first_start = -static_cast<long>(g.window / 2);
  g.max_lag = max_lag;
  g.centered = true;
  std::vector<double> diff(frames * (max_lag + 1));
  kernels::parallel::yin_difference(g, w.samples, diff);

  c.values.assign(frames, 0.0);
  c.voiced.assign(frames, 0);
  std::vector<double> cmnd(max_lag + 1);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* d = diff.data() + f * (max_lag + 1);
    // Cumulative mean normalized difference.
    cmnd[0] = 1.0;
    double running = 0.0;
    for (std::size_t tau = 1; tau <= max_lag; ++tau) {
      running += d[tau];
      cmnd[tau] = running > 0.0 ? d[tau] * static_cast<double>(tau) / running : 1.0;
    }
    std::size_t best = 0;
    for (std::size_t tau = min_lag; tau < max_lag; ++tau) {
      if (cmnd[tau] < cfg.threshold) {
        while (tau + 1 < max_lag && cmnd[tau + 1] < cmnd[tau]) ++tau;
        best = tau;
        break;
      }
    }
    if (best == 0) continue;
    const double a = cmnd[best - 1], b = cmnd[best], e = cmnd[best + 1];
    const double denom = a - 2.0 * b + e;
    double shift = 0.0;
    if (std::abs(denom) > 1e-12) shift = std::clamp(0.5 * (a - e) / denom, -0.5, 0.5);
    const double f0 = sr / (static_cast<double>(best) + shift);
    if (f0 < cfg.fmin || f0 > cfg.fmax) continue;
    c.values[f] = f0;
    c.voiced[f] = 1;
  }
  return c;
}

F0Stats compute_stats(std::span<const F0Contour> contours) {
  std::size_t n = 0;
  double sum = 0.0;
  for (const auto& c : contours)
    for (std::size_t t = 0; t < c.size(); ++t)
      if (c.voiced[t]) {
        sum += c.values[t];
        ++n;
      }
  if (n < 2) throw DataError("insufficient voiced frames");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& c : contours)
    for (std::size_t t = 0; t < c.size(); ++t)
      if (c.voiced[t]) ss += (c.values[t] - mean) * (c.values[t] - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n)), n};
}

F0Stats compute_stats(const F0Contour& contour) {
  return compute_stats(std::span<const F0Contour>(&contour, 1));
}

std::vector<std::optional<double>> normalize_f0(const F0Contour& c,
                                                const F0Stats& stats) {
  if (!(stats.std > 0.0))
    throw std::invalid_argument("normalize_f0: std must be positive");
  std::vector<std::optional<double>> out(c.size());
  for (std::size_t t = 0; t < c.size(); ++t) {
    if (!c.voiced[t]) continue;
    const double z = std::clamp((c.values[t] - stats.mean) / stats.std, -3.0, 3.0);
    out[t] = (z + 3.0) / 6.0;
  }
  return out;
}

QuantizedF0 quantize_f0(std::span<const std::optional<double>> normalized,
                        int levels) {
  if (levels < 2) throw std::invalid_argument("quantize_f0: need at least 2 levels");
  QuantizedF0 q;
  q.levels = levels;
  q.bins.resize(normalized.size(), 0);
  for (std::size_t t = 0; t < normalized.size(); ++t) {
    if (!normalized[t]) continue;
    const double v = *normalized[t];
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("quantize_f0: normalized value outside [0, 1]");
    q.bins[t] = 1 + static_cast<int>(std::lround(v * (levels - 2)));
  }
  return q;
}

double bin_center(int bin, int levels) {
  if (bin < 1 || bin >= levels)
    throw std::invalid_argument("bin_center: not a voiced bin");
  return levels == 2 ? 0.0 : static_cast<double>(bin - 1) / (levels - 2);
}

F0Contour decimate(const F0Contour& c, int factor) {
  if (factor < 1) throw std::invalid_argument("decimate: factor must be >= 1");
  F0Contour out;
  out.frame_rate = c.frame_rate / factor;
  for (std::size_t t = 0; t < c.size(); t += static_cast<std::size_t>(factor)) {
    out.values.push_back(c.values[t]);
    out.voiced.push_back(c.voiced[t]);
  }
  return out;
}

namespace {

std::filesystem::path sidecar(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".json");
}

}  // namespace

void save_f0_cache(const F0Contour& c, const TrackerConfig& cfg,
                   const std::filesystem::path& path) {
  std::vector<char> buf(c.size() * 5);
  for (std::size_t t = 0; t < c.size(); ++t) {
    const float f = static_cast<float>(c.values[t]);
    std::uint32_t u;
    std::memcpy(&u, &f, sizeof u);
    for (int i = 0; i < 4; ++i) buf[t * 4 + i] = static_cast<char>(u >> (8 * i));
    buf[c.size() * 4 + t] = static_cast<char>(c.voiced[t] ? 1 : 0);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write f0 cache: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));

  nlohmann::json meta = {
      {"frame_rate", c.frame_rate},
      {"range", {cfg.fmin, cfg.fmax}},
      {"tracker_params",
       {{"kind", "yin"},
        {"threshold", cfg.threshold},
        {"window_seconds", cfg.window_seconds}}},
      {"count", c.size()},
  };
  std::ofstream js(sidecar(path), std::ios::trunc);
  if (!js) throw DataError("cannot write f0 cache sidecar: " + path.string());
  js << meta.dump(2) << '\n';
}

F0Contour load_f0_cache(const std::filesystem::path& path) {
  std::ifstream js(sidecar(path));
  if (!js) throw DataError("missing f0 cache sidecar for " + path.string());
  nlohmann::json meta;
  try {
    js >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid f0 cache sidecar for " + path.string() + ": " + e.what());
  }
  const std::size_t count = meta.at("count").get<std::size_t>();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open f0 cache: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (buf.size() < count * 5) throw DataError("truncated payload: " + path.string());

  F0Contour c;
  c.frame_rate = meta.at("frame_rate").get<double>();
  c.values.resize(count);
  c.voiced.resize(count);
  for (std::size_t t = 0; t < count; ++t) {
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i)
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[t * 4 + i])) << (8 * i);
    float f;
    std::memcpy(&f, &u, sizeof f);
    c.values[t] = f;
    c.voiced[t] = buf[count * 4 + t] ? 1 : 0;
  }
  return c;
}

}  // namespace svc
