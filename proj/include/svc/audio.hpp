#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace svc {

// Mono audio with samples nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 24000;

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit float samples. Only
// channel 0 is kept. Float files whose peak exceeds 1 are rescaled to peak 1.
// Throws WavError (kMissingFile, kMalformedHeader, kUnsupportedEncoding).
Waveform load_wav(const std::filesystem::path& path);

// Writes mono 16-bit PCM. Samples outside [-1, 1] or non-finite raise
// WavError(kOutOfRange); nothing is clipped silently.
void save_wav(const Waveform& w, const std::filesystem::path& path);

// Band-limited (Kaiser-windowed sinc) sample-rate conversion. Output length
// is round(len * target_rate / sample_rate).
Waveform resample(const Waveform& w, int target_rate);

struct MelConfig {
  int sample_rate = 24000;
  int fft_size = 1024;
  int hop = 120;
  int window = 1024;
  int bands = 80;
  double fmin = 0.0;
  double fmax = 12000.0;
  double floor = 1e-5;

  double frame_rate() const { return static_cast<double>(sample_rate) / hop; }
};

// Frame-major log-mel energies, frames x bands.
struct MelSpectrogram {
  std::size_t frames = 0;
  std::size_t bands = 0;
  double frame_rate = 0.0;
  std::vector<double> data;

  double at(std::size_t t, std::size_t b) const { return data[t * bands + b]; }
};

// Slaney-style mel scale (linear below 1 kHz, logarithmic above).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Band centre frequencies of the filterbank, in Hz.
std::vector<double> mel_band_centers(const MelConfig& cfg);

// Triangular, area-normalized filterbank: bands x (fft_size/2 + 1).
std::vector<double> mel_filterbank(const MelConfig& cfg);

// Short-time log-mel analysis. Frame t is centred on sample t*hop with the
// window zero-padded past either end, so there are ceil(len/hop) frames.
class MelAnalyzer {
 public:
  explicit MelAnalyzer(const MelConfig& cfg);

  const MelConfig& config() const { return cfg_; }
  std::size_t frame_count(std::size_t num_samples) const;

  MelSpectrogram compute(std::span<const double> samples) const;

  // mean |logmel(samples) - reference| over all entries, and its gradient
  // with respect to the samples (accumulated into `grad`, scaled by
  // `grad_scale`). The reference must have frame_count(len) frames.
  double l1_distance(std::span<const double> samples,
                     const MelSpectrogram& reference, std::span<double> grad,
                     double grad_scale) const;

 private:
  MelConfig cfg_;
  std::vector<double> window_;
  std::vector<double> filterbank_;
  std::size_t bins_;
};

// Convenience wrapper building a MelAnalyzer. Requires w.sample_rate to match
// cfg.sample_rate.
MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg);

}  // namespace svc
