#pragma once

// Synthetic test signals.

#include <cmath>
#include <numbers>
#include <vector>

#include "svc/audio.hpp"

namespace svc::test {

inline Waveform sine(double hz, double seconds, int rate = 24000, double amp = 0.5) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::lround(seconds * rate));
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  return w;
}

// Sine whose instantaneous frequency moves linearly from f_start to f_end.
inline Waveform sweep(double f_start, double f_end, double seconds, int rate = 24000,
                      double amp = 0.5) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::lround(seconds * rate));
  w.samples.resize(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = f_start + (f_end - f_start) * static_cast<double>(i) / static_cast<double>(n);
    w.samples[i] = amp * std::sin(phase);
    phase += 2.0 * std::numbers::pi * f / rate;
  }
  return w;
}

inline double sweep_frequency(double f_start, double f_end, double seconds, double t) {
  return f_start + (f_end - f_start) * t / seconds;
}

// Sung-vowel stand-in: harmonic tone whose f0 glides linearly from 180 to
// 300 Hz, with a slowly moving spectral envelope.
inline double vowel_f0(double t, double seconds) {
  return 180.0 + 120.0 * t / seconds;
}

inline Waveform vowel(double seconds, int rate = 24000) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::lround(seconds * rate));
  w.samples.resize(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f0 = vowel_f0(t, seconds);
    const double formant = 700.0 + 500.0 * t / seconds;
    double s = 0.0;
    for (int k = 1; f0 * k < 6000.0; ++k) {
      const double fk = f0 * k;
      const double env = 1.0 / (1.0 + std::pow((fk - formant) / 400.0, 2.0)) + 0.15 / k;
      s += env * std::sin(k * phase);
    }
    w.samples[i] = 0.25 * s;
    phase += 2.0 * std::numbers::pi * f0 / rate;
  }
  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  for (double& v : w.samples) v *= 0.6 / peak;
  return w;
}

}  // namespace svc::test
