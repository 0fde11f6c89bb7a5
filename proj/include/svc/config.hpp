#pragma once

// Run configuration: every module setting in one JSON document.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "svc/audio.hpp"
#include "svc/content.hpp"
#include "svc/f0enc.hpp"
#include "svc/pitch.hpp"
#include "svc/vocoder.hpp"

namespace svc {

struct TrainConfig {
  double lr = 2e-4;
  double lambda_recon = 40.0;
  double lambda_fm = 1.0;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double lr_decay = 0.999;        // per epoch
  std::int64_t steps_per_epoch = 0;  // 0: ceil(clips / batch_size)
  int batch_size = 1;
  int segment_frames = 32;        // at the conditioning rate
  std::int64_t steps = 2000;
  std::int64_t checkpoint_interval = 500;
  std::uint64_t seed = 1;
  bool freeze_discriminators = false;
};

struct PathsConfig {
  std::string manifest;
  std::string registry;
  std::string out_dir = "run";
};

struct RunConfig {
  int sample_rate = 24000;
  MelConfig mel;
  TrackerConfig tracker;
  // Corpus-wide f0 statistics used by the quantizer. std == 0 means "not yet
  // computed"; training fills them in from its clips.
  F0Stats normalization;
  EncoderKind encoder = EncoderKind::kPbtc;
  EncoderDims encoder_dims;
  FeatureProvider content;
  int singer_count = 1;
  int singer_dim = 128;
  std::string generator_preset = "desk";
  GeneratorConfig generator;
  int generator_input = 0;  // must equal F + D + S
  DiscriminatorConfig discriminators;
  TrainConfig train;
  PathsConfig paths;

  int hop() const { return generator.hop(); }
  int conditioning_width() const {
    return encoder_dims.dim + static_cast<int>(content.dim) + singer_dim;
  }
  // Tracker frames per conditioning frame, and conditioning frames per
  // content frame.
  int f0_decimation() const;
  int content_repeat() const;

  // Throws ConfigError on any inconsistency.
  void validate() const;
};

// Desk-scale defaults: 200 Hz conditioning, 64 base channels.
RunConfig default_config();
// Small model used by the overfit harness and tests: 32 base channels,
// F = 32, D = 64, S = 16, reduced discriminators.
RunConfig tiny_config();

nlohmann::json to_json(const RunConfig& cfg);
// Missing keys keep their defaults. Throws ConfigError on bad values.
RunConfig config_from_json(const nlohmann::json& j);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

// FNV-1a 64 over the canonical JSON of everything that shapes the model or
// its training trajectory. Paths, total step count and checkpoint interval
// are excluded so that a run can be resumed for more steps elsewhere.
std::uint64_t fingerprint(const RunConfig& cfg);
std::string fingerprint_hex(std::uint64_t fp);

}  // namespace svc
