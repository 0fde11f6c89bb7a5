#pragma once

// Frame-level content features at 50 Hz. They come either from files
// produced offline by a self-supervised speech model, or from a seeded
// pseudo-feature extractor so the pipeline runs without one.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svc/audio.hpp"
#include "svc/matrix.hpp"

namespace svc {

inline constexpr double kContentRate = 50.0;

struct ContentFeatures {
  std::size_t rows = 0;
  std::size_t dim = 0;
  double rate = kContentRate;
  std::string source_model;
  std::vector<float> data;  // rows x dim, row-major

  float at(std::size_t r, std::size_t c) const { return data[r * dim + c]; }
};

// Container: `path` holds rows*dim little-endian float32 values, row-major;
// `path` + ".json" holds {rows, dim, rate, source_model}.
void save_features(const ContentFeatures& f, const std::filesystem::path& path);

// Throws DataError with "dim mismatch", "rate mismatch" or
// "truncated payload" when the container disagrees with expectations.
ContentFeatures load_features(const std::filesystem::path& path,
                              std::size_t expected_dim);

// Log-mel analysis at hop 320 (50 Hz) with 80 bands, followed by a fixed
// random 80 -> dim linear map drawn from `seed`. Requires 16 kHz input.
ContentFeatures pseudo_features(const Waveform& w16k, std::size_t dim,
                                std::uint64_t seed);

MelConfig pseudo_feature_mel_config();

// Repeats each input row target_rate / rate times. Throws
// std::invalid_argument ("non-integer ratio") otherwise.
Matrix upsample_features(const ContentFeatures& f, double target_rate);

enum class ProviderKind { kFile, kPseudo };

std::string to_string(ProviderKind k);
ProviderKind provider_kind_from_string(const std::string& s);

struct FeatureProvider {
  ProviderKind kind = ProviderKind::kPseudo;
  std::size_t dim = 64;
  std::uint64_t seed = 1234;

  // Pseudo: resamples `audio` to 16 kHz and extracts. File: loads
  // `feature_path` and checks its dimension.
  ContentFeatures provide(const Waveform& audio,
                          const std::filesystem::path& feature_path = {}) const;
};

}  // namespace svc
