#include "svc/content.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "svc/error.hpp"
#include "svc/rng.hpp"

namespace svc {

namespace {

std::filesystem::path sidecar(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".json");
}

}  // namespace

void save_features(const ContentFeatures& f, const std::filesystem::path& path) {
  if (f.data.size() != f.rows * f.dim)
    throw std::invalid_argument("save_features: data size does not match rows x dim");
  std::vector<char> buf(f.data.size() * 4);
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    std::uint32_t u;
    std::memcpy(&u, &f.data[i], sizeof u);
    for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>(u >> (8 * b));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write feature file: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  nlohmann::json meta = {{"rows", f.rows},
                         {"dim", f.dim},
                         {"rate", f.rate},
                         {"source_model", f.source_model}};
  std::ofstream js(sidecar(path), std::ios::trunc);
  if (!js) throw DataError("cannot write feature sidecar: " + path.string());
  js << meta.dump(2) << '\n';
}

ContentFeatures load_features(const std::filesystem::path& path,
                              std::size_t expected_dim) {
  std::ifstream js(sidecar(path));
  if (!js) throw DataError("missing feature sidecar for " + path.string());
  nlohmann::json meta;
  try {
    js >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid feature sidecar for " + path.string() + ": " + e.what());
  }
  ContentFeatures f;
  try {
    f.rows = meta.at("rows").get<std::size_t>();
    f.dim = meta.at("dim").get<std::size_t>();
    f.rate = meta.at("rate").get<double>();
    f.source_model = meta.value("source_model", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid feature sidecar for " + path.string() + ": " + e.what());
  }
  if (f.dim != expected_dim)
    throw DataError("dim mismatch: " + path.string() + " has dim " +
                    std::to_string(f.dim) + ", expected " +
                    std::to_string(expected_dim));
  if (f.rate != kContentRate)
    throw DataError("rate mismatch: " + path.string() + " has rate " +
                    std::to_string(f.rate) + ", expected 50");

  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  const std::size_t n = f.rows * f.dim;
  if (buf.size() < n * 4) throw DataError("truncated payload: " + path.string());
  f.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b)
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i * 4 + b])) << (8 * b);
    std::memcpy(&f.data[i], &u, sizeof u);
  }
  return f;
}

MelConfig pseudo_feature_mel_config() {
  MelConfig cfg;
  cfg.sample_rate = 16000;
  cfg.fft_size = 1024;
  cfg.hop = 320;
  cfg.window = 1024;
  cfg.bands = 80;
  cfg.fmin = 0.0;
  cfg.fmax = 8000.0;
  return cfg;
}

ContentFeatures pseudo_features(const Waveform& w16k, std::size_t dim,
                                std::uint64_t seed) {
  if (w16k.sample_rate != 16000)
    throw std::invalid_argument("pseudo_features: expected 16 kHz audio");
  if (dim == 0) throw std::invalid_argument("pseudo_features: dim must be positive");
  const MelConfig mc = pseudo_feature_mel_config();
  const MelSpectrogram mel = MelAnalyzer(mc).compute(w16k.samples);
  const std::size_t bands = mel.bands;

  Rng rng(mix_seed(seed, 0xfea7u));
  const double sd = 1.0 / std::sqrt(static_cast<double>(bands));
  std::vector<double> proj(dim * bands);
  for (auto& e : proj) e = rng.normal(0.0, sd);

  ContentFeatures f;
  f.rows = mel.frames;
  f.dim = dim;
  f.rate = kContentRate;
  f.source_model = "pseudo-mel80";
  f.data.resize(f.rows * dim);
  for (std::size_t t = 0; t < f.rows; ++t)
    for (std::size_t d = 0; d < dim; ++d) {
      double acc = 0.0;
      for (std::size_t b = 0; b < bands; ++b) acc += proj[d * bands + b] * mel.at(t, b);
      f.data[t * dim + d] = static_cast<float>(acc);
    }
  return f;
}

Matrix upsample_features(const ContentFeatures& f, double target_rate) {
  const double ratio = target_rate / f.rate;
  const double r = std::round(ratio);
  if (!(ratio >= 1.0) || std::abs(ratio - r) > 1e-9)
    throw std::invalid_argument("non-integer ratio: cannot upsample " +
                                std::to_string(f.rate) + " Hz features to " +
                                std::to_string(target_rate) + " Hz");
  const auto rep = static_cast<std::size_t>(r);
  Matrix out(f.rows * rep, f.dim);
  for (std::size_t i = 0; i < f.rows; ++i)
    for (std::size_t j = 0; j < rep; ++j)
      for (std::size_t c = 0; c < f.dim; ++c)
        out(i * rep + j, c) = f.at(i, c);
  return out;
}

std::string to_string(ProviderKind k) {
  return k == ProviderKind::kFile ? "file" : "pseudo";
}

ProviderKind provider_kind_from_string(const std::string& s) {
  if (s == "file") return ProviderKind::kFile;
  if (s == "pseudo") return ProviderKind::kPseudo;
  throw std::invalid_argument("unknown feature provider: " + s);
}

ContentFeatures FeatureProvider::provide(
    const Waveform& audio, const std::filesystem::path& feature_path) const {
  if (kind == ProviderKind::kFile) {
    if (feature_path.empty())
      throw DataError("file feature provider needs a feature path");
    return load_features(feature_path, dim);
  }
  return pseudo_features(resample(audio, 16000), dim, seed);
}

}  // namespace svc
