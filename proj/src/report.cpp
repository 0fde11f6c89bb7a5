#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "svc/error.hpp"
#include "svc/pipeline.hpp"

namespace svc {

namespace {

// Binary greyscale PGM, time left to right, low bands at the bottom.
void write_mel_pgm(const MelSpectrogram& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  const std::size_t w = std::max<std::size_t>(m.frames, 1), h = m.bands;
  out << "P5\n" << w << ' ' << h << "\n255\n";
  double lo = 0.0, hi = 1.0;
  if (!m.data.empty()) {
    const auto [a, b] = std::minmax_element(m.data.begin(), m.data.end());
    lo = *a;
    hi = *b > *a ? *b : *a + 1.0;
  }
  std::vector<char> row(w);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t band = h - 1 - r;
    for (std::size_t t = 0; t < w; ++t) {
      const double v = t < m.frames ? (m.at(t, band) - lo) / (hi - lo) : 0.0;
      row[t] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
    }
    out.write(row.data(), static_cast<std::streamsize>(w));
  }
}

std::string polyline_paths(const F0Contour& c, double x_scale, double y_of_hz_top,
                           double hz_max, double height, const char* colour) {
  std::ostringstream s;
  std::ostringstream pts;
  std::size_t run = 0;
  auto flush = [&]() {
    if (run >= 2)
      s << "<polyline fill=\"none\" stroke=\"" << colour
        << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    pts.str("");
    run = 0;
  };
  for (std::size_t t = 0; t < c.size(); ++t) {
    if (!c.voiced[t]) {
      flush();
      continue;
    }
    const double y = y_of_hz_top + height * (1.0 - std::min(c.values[t], hz_max) / hz_max);
    pts << t * x_scale << ',' << y << ' ';
    ++run;
  }
  flush();
  return s.str();
}

void write_f0_svg(const F0Contour& cond, const F0Contour& out,
                  const std::filesystem::path& path) {
  const double width = 800, height = 300, top = 20;
  const std::size_t n = std::max<std::size_t>({cond.size(), out.size(), 1});
  double hz_max = 100.0;
  for (const auto* c : {&cond, &out})
    for (std::size_t t = 0; t < c->size(); ++t)
      if (c->voiced[t]) hz_max = std::max(hz_max, c->values[t]);
  hz_max *= 1.1;
  const double xs = width / static_cast<double>(n);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
    << height + 2 * top << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"4\" y=\"14\" font-size=\"12\">f0 (Hz, max " << std::lround(hz_max)
    << "): conditioning (blue) vs re-tracked output (red)</text>\n";
  f << polyline_paths(cond, xs, top, hz_max, height, "#1f4fbf");
  f << polyline_paths(out, xs, top, hz_max, height, "#c8302a");
  f << "</svg>\n";
}

}  // namespace

EvalMetrics eval_report(const RunConfig& cfg, const Model& model,
                        const Waveform& clip, int singer_id,
                        const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  SingerProfile self;
  self.id = singer_id;
  self.stats = cfg.normalization;  // identity shift: any stats with std > 0
  const Conversion conv = convert(cfg, model, clip, self, self);

  Waveform source = resample(clip, cfg.sample_rate);
  source.samples.resize(conv.audio.size(), 0.0);
  const MelAnalyzer mel(cfg.mel);
  const MelSpectrogram ms = mel.compute(source.samples);
  const MelSpectrogram mo = mel.compute(conv.audio.samples);
  EvalMetrics m;
  m.mel_l1 = mel.l1_distance(conv.audio.samples, ms, {}, 1.0);

  const F0Contour retracked = extract_f0(conv.audio, cfg.tracker);
  const double r = pearson_voiced(conv.shifted_f0, retracked);
  m.f0_pearson_voiced = std::isfinite(r) ? r : 0.0;
  for (std::size_t t = 0; t < std::min(retracked.size(), conv.shifted_f0.size()); ++t)
    if (retracked.voiced[t] && conv.shifted_f0.voiced[t]) ++m.voiced_frames;

  write_mel_pgm(ms, out_dir / "source_mel.pgm");
  write_mel_pgm(mo, out_dir / "output_mel.pgm");
  write_f0_svg(conv.shifted_f0, retracked, out_dir / "f0_overlay.svg");
  save_wav(conv.audio, out_dir / "output.wav");
  nlohmann::json j = {{"mel_l1", m.mel_l1},
                      {"f0_pearson_voiced", m.f0_pearson_voiced},
                      {"voiced_frames_compared", m.voiced_frames}};
  std::ofstream f(out_dir / "metrics.json", std::ios::trunc);
  if (!f) throw DataError("cannot write metrics to " + out_dir.string());
  f << j.dump(2) << '\n';
  return m;
}

}  // namespace svc
