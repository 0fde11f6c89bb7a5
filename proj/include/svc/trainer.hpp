#pragma once

// Alternating GAN training of the f0 encoder, singer table, generator and
// discriminators.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "svc/config.hpp"
#include "svc/content.hpp"
#include "svc/f0enc.hpp"
#include "svc/matrix.hpp"
#include "svc/nn/adam.hpp"
#include "svc/pitch.hpp"
#include "svc/singer.hpp"
#include "svc/vocoder.hpp"

namespace svc {

// All learnable parts. Generator-side parameters (encoder, singer table,
// generator) and discriminator parameters are disjoint lists.
struct Model {
  F0Encoder encoder;
  SingerEmbedding singers;
  Generator generator;
  Discriminators discriminators;

  nn::ParamList generator_params() const;
  nn::ParamList discriminator_params() const;
};

// Deterministic initialisation from cfg.train.seed.
Model build_model(const RunConfig& cfg);

// One training utterance with its precomputed analysis streams.
struct TrainingClip {
  Waveform audio;           // 24 kHz
  F0Contour f0;             // tracker rate
  ContentFeatures content;  // 50 Hz
  int singer_id = 0;
  std::string kind = "singing";
};

// A clip aligned to the conditioning grid.
struct PreparedClip {
  QuantizedF0 bins;               // conditioning rate, `frames` long
  Matrix content;                 // frames x D
  std::vector<double> audio;      // frames * hop samples (zero padded)
  int singer_id = 0;
  std::size_t frames = 0;
};

// Decimates f0 and repeats content to the conditioning rate, quantizes f0
// with the corpus statistics, and trims all streams to a common length.
PreparedClip prepare_clip(const RunConfig& cfg, const TrainingClip& clip,
                          const F0Stats& normalization);

// Builds a TrainingClip from audio using the tracker and the configured
// feature provider.
TrainingClip analyze_clip(const RunConfig& cfg, const Waveform& audio24k,
                          int singer_id);

// Generator input for frames [start, start + count) of a clip. Encoder
// context before `start` is included so a crop matches the full utterance.
nn::Tensor clip_conditioning(const Model& model, const PreparedClip& clip,
                             std::size_t start, std::size_t count);

struct StepLosses {
  double adv_d = 0.0;
  double adv_g = 0.0;
  double fm = 0.0;
  double mel = 0.0;
  double g_total = 0.0;
};

struct Batch {
  nn::Tensor conditioning;  // [N, C, frames] (rows from different clips)
  nn::Tensor audio;         // [N, 1, frames * hop]
  std::vector<MelSpectrogram> mels;
};

class Trainer {
 public:
  Trainer(RunConfig cfg, std::vector<PreparedClip> clips);

  // One discriminator update followed by one generator update. Throws
  // DivergenceError on a non-finite loss.
  StepLosses step();

  // The halves of step(), exposed for tests. Both act on the batch drawn for
  // the current step; neither advances the step counter.
  Batch sample_batch() const;
  nn::Tensor generate(const Batch& b) const;
  double discriminator_step(const Batch& b, const nn::Tensor& fake);
  StepLosses generator_step(const Batch& b, const nn::Tensor& fake);

  // Learning rate used at the current step.
  double current_lr() const;
  std::int64_t steps_done() const { return step_; }
  void set_steps_done(std::int64_t s) { step_ = s; }
  std::int64_t steps_per_epoch() const;

  // mean |logmel(G(clip)) - logmel(clip)| over the whole clip.
  double evaluate_mel(const PreparedClip& clip) const;

  const RunConfig& config() const { return cfg_; }
  Model& model() { return model_; }
  const Model& model() const { return model_; }
  nn::Adam& adam_g() { return adam_g_; }
  nn::Adam& adam_d() { return adam_d_; }
  const std::vector<PreparedClip>& clips() const { return clips_; }

 private:
  RunConfig cfg_;
  std::vector<PreparedClip> clips_;
  Model model_;
  nn::Adam adam_g_, adam_d_;
  MelAnalyzer mel_;
  std::int64_t step_ = 0;
};

// Trains on one clip for cfg.train.steps steps and returns the per-step
// L_mel. `on_step` (optional) sees every step's losses.
std::vector<double> overfit_single_clip(
    Trainer& trainer,
    const std::function<void(std::int64_t, const StepLosses&)>& on_step = {});

// Data manifest: one JSON object per line with wav_path, singer_id, kind,
// f0_cache and feature_cache (relative paths resolve against the manifest's
// directory).
struct ManifestEntry {
  std::filesystem::path wav_path;
  int singer_id = 0;
  std::string kind = "singing";
  std::filesystem::path f0_cache;
  std::filesystem::path feature_cache;
};

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

// Loads audio and caches for each entry; missing caches are computed.
TrainingClip load_training_clip(const RunConfig& cfg, const ManifestEntry& e);

}  // namespace svc
