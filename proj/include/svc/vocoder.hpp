#pragma once

// HiFi-GAN style vocoder: conditioning assembly, generator, multi-period and
// multi-scale discriminators, and the GAN training losses.

#include <cstdint>
#include <string>
#include <vector>

#include "svc/audio.hpp"
#include "svc/nn/layers.hpp"
#include "svc/nn/tensor.hpp"

namespace svc {

// Streams longer than the shortest by more than this many frames are
// rejected as misaligned.
inline constexpr std::size_t kMaxStreamSkew = 4;

// Concatenates [f0 features | content | singer] into a generator input of
// shape [1, F + D + S, T] with T = min(T_a, T_b). f0_feat is [T_a, F],
// content is [T_b, D], singer is [1, S] (broadcast over time). Throws
// DataError("stream misalignment") when |T_a - T_b| > kMaxStreamSkew.
nn::Tensor assemble_conditioning(const nn::Tensor& f0_feat,
                                 const nn::Tensor& content,
                                 const nn::Tensor& singer);

struct GeneratorConfig {
  std::vector<int> upsample_rates{5, 4, 3, 2};
  std::vector<int> resblock_kernels{3, 7, 11};
  std::vector<int> resblock_dilations{1, 3, 5};
  int base_channels = 64;
  double conditioning_rate = 200.0;

  int hop() const;  // product of the upsample rates
  // Throws ConfigError when rates, kernels or channels are inconsistent.
  void validate(int sample_rate = 24000) const;
};

// "tiny" (32 channels), "desk" (64), "paper" (512) at 200 Hz with rates
// [5, 4, 3, 2]; "paper-literal" keeps rates [3, 4, 5, 8] at 50 Hz with 512
// channels. Throws ConfigError for unknown names.
GeneratorConfig generator_preset(const std::string& name);

class Generator {
 public:
  Generator() = default;
  Generator(int in_channels, const GeneratorConfig& cfg, std::uint64_t seed);

  // [N, in_channels, T] -> [N, 1, T * hop], values in (-1, 1). Throws
  // std::invalid_argument on a channel mismatch.
  nn::Tensor forward(const nn::Tensor& cond) const;

  int in_channels() const { return in_channels_; }
  const GeneratorConfig& config() const { return cfg_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

 private:
  struct ResBlock {
    std::vector<nn::WnConv1d> convs1, convs2;
  };
  struct Stage {
    nn::WnConvTranspose1d up;
    std::vector<ResBlock> blocks;
  };

  int in_channels_ = 0;
  GeneratorConfig cfg_;
  nn::WnConv1d pre_, post_;
  std::vector<Stage> stages_;
};

struct DiscriminatorConfig {
  std::vector<int> mpd_periods{2, 3, 5, 7, 11};
  std::vector<int> msd_scales{1, 2, 4};
  // Output channels of the four strided MPD convolutions; the fifth
  // (stride 1) keeps the last width.
  std::vector<int> mpd_channels{32, 128, 512, 1024};
  // Output channels and groups of the seven MSD convolutions.
  std::vector<int> msd_channels{128, 128, 256, 512, 1024, 1024, 1024};
  std::vector<int> msd_groups{1, 4, 16, 16, 16, 16, 1};

  void validate() const;
};

// Small channel schedule for desk-scale training.
DiscriminatorConfig tiny_discriminators();

// Output of one sub-discriminator: flattened scores and the intermediate
// activations used by the feature-matching loss.
struct DiscOutput {
  nn::Tensor score;
  std::vector<nn::Tensor> features;
};

class PeriodDiscriminator {
 public:
  PeriodDiscriminator() = default;
  PeriodDiscriminator(int period, const std::vector<int>& channels, Rng& rng);

  DiscOutput forward(const nn::Tensor& wave) const;  // wave: [N, 1, L]
  int period() const { return period_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;
  nn::WnConv1d& post() { return post_; }

 private:
  int period_ = 2;
  std::vector<nn::WnConv1d> convs_;
  nn::WnConv1d post_;
};

class ScaleDiscriminator {
 public:
  ScaleDiscriminator() = default;
  ScaleDiscriminator(const std::vector<int>& channels,
                     const std::vector<int>& groups, Rng& rng);

  DiscOutput forward(const nn::Tensor& wave) const;
  void collect(nn::ParamList& out, const std::string& prefix) const;
  nn::WnConv1d& post() { return post_; }

 private:
  std::vector<nn::WnConv1d> convs_;
  nn::WnConv1d post_;
};

// [N, 1, L] -> [N * p, 1, ceil(L / p)] input geometry of period p.
struct FoldShape {
  std::size_t rows;
  std::size_t columns;
};
FoldShape period_fold_shape(std::size_t length, std::size_t period);

// Length after one average-pooling pass (kernel 4, stride 2, pad 1).
std::size_t pooled_length(std::size_t length);

// Both discriminator families. forward() returns the period outputs in
// config order followed by the scale outputs.
class Discriminators {
 public:
  Discriminators() = default;
  Discriminators(const DiscriminatorConfig& cfg, std::uint64_t seed);

  std::vector<DiscOutput> forward(const nn::Tensor& wave) const;
  std::vector<DiscOutput> forward_mpd(const nn::Tensor& wave) const;
  std::vector<DiscOutput> forward_msd(const nn::Tensor& wave) const;

  std::size_t count() const { return mpd_.size() + msd_.size(); }
  const DiscriminatorConfig& config() const { return cfg_; }
  void collect(nn::ParamList& out, const std::string& prefix) const;

  // Zeroes every output-layer gain and sets its bias to `value`, so each
  // sub-discriminator scores every input as `value`.
  void set_constant_output(double value);

 private:
  DiscriminatorConfig cfg_;
  std::vector<PeriodDiscriminator> mpd_;
  std::vector<ScaleDiscriminator> msd_;
};

// Least-squares adversarial terms and feature matching, summed over
// sub-discriminators.
nn::Tensor discriminator_adv_loss(const std::vector<nn::Tensor>& real_scores,
                                  const std::vector<nn::Tensor>& fake_scores);
nn::Tensor generator_adv_loss(const std::vector<nn::Tensor>& fake_scores);
nn::Tensor feature_matching_loss(const std::vector<DiscOutput>& real,
                                 const std::vector<DiscOutput>& fake);

std::vector<nn::Tensor> scores_of(const std::vector<DiscOutput>& outs);

// mean |logmel(wave[n]) - reference[n]| over all items, frames and bands.
// wave: [N, 1, L]; the gradient flows to `wave`.
nn::Tensor mel_l1_loss(const nn::Tensor& wave,
                       const std::vector<MelSpectrogram>& reference,
                       const MelAnalyzer& analyzer);

struct LossWeights {
  double recon = 40.0;
  double fm = 1.0;
};

struct GanLossValues {
  double adv_d = 0.0;
  double adv_g = 0.0;
  double fm = 0.0;
  double mel = 0.0;

  double generator_total(const LossWeights& w) const {
    return adv_g + w.fm * fm + w.recon * mel;
  }
};

// Evaluates all four losses for equal-length real and fake batches
// ([N, 1, L]) without recording gradients. Throws std::invalid_argument on a
// shape mismatch.
GanLossValues gan_losses(const nn::Tensor& real, const nn::Tensor& fake,
                         const Discriminators& disc,
                         const MelAnalyzer& analyzer);

}  // namespace svc
