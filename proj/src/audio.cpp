#include "svc/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "svc/error.hpp"

namespace svc {

namespace {

// ---------------------------------------------------------------- WAV

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

// ---------------------------------------------------------------- FFT

struct FftPlans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

// Plans are created once per size under a lock; execution through the
// new-array interface is thread-safe.
const FftPlans& plans_for(int n) {
  static std::mutex mu;
  static std::map<int, FftPlans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double* in = fftw_alloc_real(static_cast<std::size_t>(n));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
  FftPlans p;
  p.r2c = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  p.c2r = fftw_plan_dft_c2r_1d(n, out, in, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  return cache.emplace(n, p).first->second;
}

struct FftBuffers {
  explicit FftBuffers(int n)
      : real(fftw_alloc_real(static_cast<std::size_t>(n))),
        spec(fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1))) {}
  ~FftBuffers() {
    fftw_free(real);
    fftw_free(spec);
  }
  FftBuffers(const FftBuffers&) = delete;
  FftBuffers& operator=(const FftBuffers&) = delete;
  double* real;
  fftw_complex* spec;
};

double kaiser(double x, double beta) {
  // x in [-1, 1]
  if (std::abs(x) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) /
         std::cyl_bessel_i(0.0, beta);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw WavError(WavErrorKind::kMissingFile,
                   "cannot open wav file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  auto malformed = [&](const std::string& why) {
    return WavError(WavErrorKind::kMalformedHeader,
                    "malformed wav header in " + path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw malformed("missing RIFF/WAVE signature");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t len = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (len < 16 || avail < 16) throw malformed("short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == kFormatExtensible) {
        if (len < 40 || avail < 40) throw malformed("short extensible fmt chunk");
        format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = std::min<std::size_t>(len, avail);
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw malformed("no fmt chunk");
  if (data == nullptr) throw malformed("no data chunk");
  if (channels == 0 || rate == 0) throw malformed("zero channels or rate");

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t frame = 2u * channels;
    const std::size_t n = data_len / frame;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::int16_t>(read_u16(data + i * frame));
      w.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t frame = 4u * channels;
    const std::size_t n = data_len / frame;
    w.samples.resize(n);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t u = read_u32(data + i * frame);
      float f;
      std::memcpy(&f, &u, sizeof f);
      if (!std::isfinite(f))
        throw WavError(WavErrorKind::kUnsupportedEncoding,
                       "non-finite float sample in " + path.string());
      w.samples[i] = f;
      peak = std::max(peak, std::abs(w.samples[i]));
    }
    if (peak > 1.0)
      for (auto& s : w.samples) s /= peak;
  } else {
    throw WavError(WavErrorKind::kUnsupportedEncoding,
                   "unsupported wav encoding (format " + std::to_string(format) +
                       ", " + std::to_string(bits) + " bits) in " + path.string());
  }
  return w;
}

void save_wav(const Waveform& w, const std::filesystem::path& path) {
  std::vector<unsigned char> out;
  const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_len);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double s = w.samples[i];
    if (!std::isfinite(s) || s < -1.0 || s > 1.0)
      throw WavError(WavErrorKind::kOutOfRange,
                     "sample " + std::to_string(i) + " = " + std::to_string(s) +
                         " outside [-1, 1]");
    const long q = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f)
    throw WavError(WavErrorKind::kUnwritable,
                   "cannot write wav file: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f)
    throw WavError(WavErrorKind::kUnwritable,
                   "short write to wav file: " + path.string());
}

Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate <= 0)
    throw std::invalid_argument("resample: target rate must be positive");
  if (target_rate == w.sample_rate) return w;

  const double ratio = static_cast<double>(target_rate) / w.sample_rate;
  const std::size_t out_len =
      static_cast<std::size_t>(std::llround(static_cast<double>(w.size()) * ratio));
  // Cutoff slightly under the lower Nyquist leaves room for the transition.
  const double cutoff = std::min(1.0, ratio) * 0.97;
  constexpr double kZeroCrossings = 32.0;
  constexpr double kBeta = 8.6;
  const double half = kZeroCrossings / cutoff;  // in input samples

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.assign(out_len, 0.0);
  const long n_in = static_cast<long>(w.size());
  const long n_out = static_cast<long>(out_len);
#pragma omp parallel for schedule(static)
  for (long n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const long lo = std::max<long>(0, static_cast<long>(std::ceil(t - half)));
    const long hi = std::min<long>(n_in - 1, static_cast<long>(std::floor(t + half)));
    double acc = 0.0;
    for (long k = lo; k <= hi; ++k) {
      const double d = t - static_cast<double>(k);
      acc += w.samples[k] * cutoff * sinc(cutoff * d) * kaiser(d / half, kBeta);
    }
    out.samples[n] = acc;
  }
  return out;
}

double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

namespace {

std::vector<double> mel_points_hz(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.fmax);
  std::vector<double> pts(static_cast<std::size_t>(cfg.bands) + 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    pts[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(pts.size() - 1));
  return pts;
}

}  // namespace

std::vector<double> mel_band_centers(const MelConfig& cfg) {
  auto pts = mel_points_hz(cfg);
  return {pts.begin() + 1, pts.end() - 1};
}

std::vector<double> mel_filterbank(const MelConfig& cfg) {
  const std::size_t bins = static_cast<std::size_t>(cfg.fft_size) / 2 + 1;
  const auto pts = mel_points_hz(cfg);
  std::vector<double> fb(static_cast<std::size_t>(cfg.bands) * bins, 0.0);
  for (std::size_t b = 0; b < static_cast<std::size_t>(cfg.bands); ++b) {
    const double left = pts[b], centre = pts[b + 1], right = pts[b + 2];
    const double enorm = 2.0 / (right - left);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
      const double lower = (f - left) / (centre - left);
      const double upper = (right - f) / (right - centre);
      fb[b * bins + k] = std::max(0.0, std::min(lower, upper)) * enorm;
    }
  }
  return fb;
}

MelAnalyzer::MelAnalyzer(const MelConfig& cfg)
    : cfg_(cfg), bins_(static_cast<std::size_t>(cfg.fft_size) / 2 + 1) {
  if (cfg.fft_size <= 0 || cfg.hop <= 0 || cfg.window <= 0 ||
      cfg.window > cfg.fft_size || cfg.bands <= 0)
    throw std::invalid_argument("MelAnalyzer: invalid mel configuration");
  // Periodic Hann of length `window`, centred inside the FFT frame.
  window_.assign(static_cast<std::size_t>(cfg.fft_size), 0.0);
  const int off = (cfg.fft_size - cfg.window) / 2;
  for (int n = 0; n < cfg.window; ++n)
    window_[static_cast<std::size_t>(off + n)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / cfg.window);
  filterbank_ = mel_filterbank(cfg);
  plans_for(cfg.fft_size);
}

std::size_t MelAnalyzer::frame_count(std::size_t num_samples) const {
  const auto hop = static_cast<std::size_t>(cfg_.hop);
  return (num_samples + hop - 1) / hop;
}

MelSpectrogram MelAnalyzer::compute(std::span<const double> samples) const {
  MelSpectrogram m;
  m.frames = frame_count(samples.size());
  m.bands = static_cast<std::size_t>(cfg_.bands);
  m.frame_rate = cfg_.frame_rate();
  m.data.assign(m.frames * m.bands, 0.0);
  const int n = cfg_.fft_size;
  const FftPlans& plans = plans_for(n);
  const long len = static_cast<long>(samples.size());
  const long frames = static_cast<long>(m.frames);
#pragma omp parallel
  {
    FftBuffers buf(n);
    std::vector<double> mag(bins_);
#pragma omp for schedule(static)
    for (long t = 0; t < frames; ++t) {
      const long start = t * cfg_.hop - n / 2;
      for (int i = 0; i < n; ++i) {
        const long s = start + i;
        buf.real[i] = (s < 0 || s >= len) ? 0.0 : samples[s] * window_[i];
      }
      fftw_execute_dft_r2c(plans.r2c, buf.real, buf.spec);
      for (std::size_t k = 0; k < bins_; ++k)
        mag[k] = std::hypot(buf.spec[k][0], buf.spec[k][1]);
      for (std::size_t b = 0; b < m.bands; ++b) {
        const double* fb = filterbank_.data() + b * bins_;
        double e = 0.0;
        for (std::size_t k = 0; k < bins_; ++k) e += fb[k] * mag[k];
        m.data[static_cast<std::size_t>(t) * m.bands + b] =
            std::log(std::max(e, cfg_.floor));
      }
    }
  }
  return m;
}

double MelAnalyzer::l1_distance(std::span<const double> samples,
                                const MelSpectrogram& reference,
                                std::span<double> grad,
                                double grad_scale) const {
  const std::size_t frames = frame_count(samples.size());
  const std::size_t bands = static_cast<std::size_t>(cfg_.bands);
  if (reference.frames != frames || reference.bands != bands)
    throw std::invalid_argument("mel l1: reference shape mismatch");
  if (!grad.empty() && grad.size() != samples.size())
    throw std::invalid_argument("mel l1: gradient buffer size mismatch");
  const int n = cfg_.fft_size;
  const FftPlans& plans = plans_for(n);
  const long len = static_cast<long>(samples.size());
  const double count = static_cast<double>(frames * bands);
  const bool want_grad = !grad.empty();
  if (frames == 0) return 0.0;

  std::vector<double> frame_loss(frames, 0.0);
  std::vector<double> frame_grad(want_grad ? frames * static_cast<std::size_t>(n) : 0);
  const long nframes = static_cast<long>(frames);
#pragma omp parallel
  {
    FftBuffers buf(n);
    std::vector<double> mag(bins_), dmag(bins_), dmel(bands);
#pragma omp for schedule(static)
    for (long t = 0; t < nframes; ++t) {
      const long start = t * cfg_.hop - n / 2;
      for (int i = 0; i < n; ++i) {
        const long s = start + i;
        buf.real[i] = (s < 0 || s >= len) ? 0.0 : samples[s] * window_[i];
      }
      fftw_execute_dft_r2c(plans.r2c, buf.real, buf.spec);
      for (std::size_t k = 0; k < bins_; ++k)
        mag[k] = std::hypot(buf.spec[k][0], buf.spec[k][1]);
      double acc = 0.0;
      for (std::size_t b = 0; b < bands; ++b) {
        const double* fb = filterbank_.data() + b * bins_;
        double e = 0.0;
        for (std::size_t k = 0; k < bins_; ++k) e += fb[k] * mag[k];
        const double diff =
            std::log(std::max(e, cfg_.floor)) -
            reference.data[static_cast<std::size_t>(t) * bands + b];
        acc += std::abs(diff);
        const double sgn = (diff > 0.0) - (diff < 0.0);
        dmel[b] = e > cfg_.floor ? grad_scale * sgn / (count * e) : 0.0;
      }
      frame_loss[static_cast<std::size_t>(t)] = acc;
      if (!want_grad) continue;

      std::fill(dmag.begin(), dmag.end(), 0.0);
      for (std::size_t b = 0; b < bands; ++b) {
        if (dmel[b] == 0.0) continue;
        const double* fb = filterbank_.data() + b * bins_;
        for (std::size_t k = 0; k < bins_; ++k) dmag[k] += fb[k] * dmel[b];
      }
      // d|X_k|/dx[n] = Re(X_k e^{+i 2 pi k n / N}) / |X_k|. Summed over the
      // one-sided spectrum this is a Hermitian inverse transform once the
      // interior bins are halved.
      for (std::size_t k = 0; k < bins_; ++k) {
        const double scale_k =
            mag[k] > 0.0 ? dmag[k] / mag[k] * ((k == 0 || k == bins_ - 1) ? 1.0 : 0.5)
                         : 0.0;
        buf.spec[k][0] *= scale_k;
        buf.spec[k][1] *= scale_k;
      }
      fftw_execute_dft_c2r(plans.c2r, buf.spec, buf.real);
      double* fg = frame_grad.data() + static_cast<std::size_t>(t) * n;
      for (int i = 0; i < n; ++i) fg[i] = buf.real[i] * window_[i];
    }
  }
  double total = 0.0;
  for (double l : frame_loss) total += l;
  if (want_grad) {
    for (std::size_t t = 0; t < frames; ++t) {
      const long start = static_cast<long>(t) * cfg_.hop - n / 2;
      const double* fg = frame_grad.data() + t * static_cast<std::size_t>(n);
      for (int i = 0; i < n; ++i) {
        const long s = start + i;
        if (s >= 0 && s < len) grad[s] += fg[i];
      }
    }
  }
  return total / count;
}

MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg) {
  if (w.sample_rate != cfg.sample_rate)
    throw std::invalid_argument("mel_spectrogram: sample rate " +
                                std::to_string(w.sample_rate) +
                                " does not match config " +
                                std::to_string(cfg.sample_rate));
  return MelAnalyzer(cfg).compute(w.samples);
}

}  // namespace svc
