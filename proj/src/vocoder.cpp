#include "svc/vocoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "svc/error.hpp"
#include "svc/nn/ops.hpp"
#include "svc/rng.hpp"

namespace svc {

namespace {

constexpr double kSlope = 0.1;
constexpr double kPostSlope = 0.01;
constexpr double kGenInitStd = 0.01;

// PyTorch's default conv initialisation has variance 1 / (3 * fan_in).
double default_std(std::size_t fan_in) {
  return 1.0 / std::sqrt(3.0 * static_cast<double>(fan_in));
}

nn::Conv1dOptions same_pad(std::size_t kernel, std::size_t dilation,
                           std::size_t stride = 1, std::size_t groups = 1) {
  nn::Conv1dOptions o;
  o.stride = stride;
  o.dilation = dilation;
  o.pad_left = o.pad_right = (kernel - 1) * dilation / 2;
  o.groups = groups;
  return o;
}

}  // namespace

nn::Tensor assemble_conditioning(const nn::Tensor& f0_feat,
                                 const nn::Tensor& content,
                                 const nn::Tensor& singer) {
  if (f0_feat.rank() != 2 || content.rank() != 2 || singer.rank() != 2 ||
      singer.dim(0) != 1)
    throw std::invalid_argument(
        "assemble_conditioning: expected [T_a, F], [T_b, D] and [1, S]");
  const std::size_t ta = f0_feat.dim(0), tb = content.dim(0);
  const std::size_t skew = ta > tb ? ta - tb : tb - ta;
  if (skew > kMaxStreamSkew)
    throw DataError("stream misalignment: f0 stream has " + std::to_string(ta) +
                    " frames, content stream has " + std::to_string(tb));
  const std::size_t t_r = std::min(ta, tb);
  const std::size_t f = f0_feat.dim(1), d = content.dim(1), s = singer.dim(1);
  const std::size_t width = f + d + s;

  std::vector<double> y(width * t_r);
  const auto fv = f0_feat.data();
  const auto cv = content.data();
  const auto sv = singer.data();
  for (std::size_t t = 0; t < t_r; ++t) {
    for (std::size_t c = 0; c < f; ++c) y[c * t_r + t] = fv[t * f + c];
    for (std::size_t c = 0; c < d; ++c) y[(f + c) * t_r + t] = cv[t * d + c];
    for (std::size_t c = 0; c < s; ++c) y[(f + d + c) * t_r + t] = sv[c];
  }
  return nn::make_result(
      {1, width, t_r}, std::move(y), {f0_feat, content, singer},
      [t_r, f, d, s](nn::Node& self) {
        const auto& g = self.grad;
        if (self.inputs[0]->requires_grad) {
          auto gf = self.inputs[0]->grad_buffer();
          for (std::size_t t = 0; t < t_r; ++t)
            for (std::size_t c = 0; c < f; ++c) gf[t * f + c] += g[c * t_r + t];
        }
        if (self.inputs[1]->requires_grad) {
          auto gc = self.inputs[1]->grad_buffer();
          for (std::size_t t = 0; t < t_r; ++t)
            for (std::size_t c = 0; c < d; ++c)
              gc[t * d + c] += g[(f + c) * t_r + t];
        }
        if (self.inputs[2]->requires_grad) {
          auto gs = self.inputs[2]->grad_buffer();
          for (std::size_t c = 0; c < s; ++c)
            for (std::size_t t = 0; t < t_r; ++t) gs[c] += g[(f + d + c) * t_r + t];
        }
      });
}

int GeneratorConfig::hop() const {
  return std::accumulate(upsample_rates.begin(), upsample_rates.end(), 1,
                         std::multiplies<int>());
}

void GeneratorConfig::validate(int sample_rate) const {
  if (upsample_rates.empty())
    throw ConfigError("generator: upsample_rates must not be empty");
  for (int r : upsample_rates)
    if (r < 1) throw ConfigError("generator: upsample rates must be positive");
  if (std::abs(hop() * conditioning_rate - sample_rate) > 1e-9)
    throw ConfigError("generator: product of upsample rates (" +
                      std::to_string(hop()) + ") times conditioning rate (" +
                      std::to_string(conditioning_rate) + ") must equal " +
                      std::to_string(sample_rate));
  if (resblock_kernels.empty() || resblock_dilations.empty())
    throw ConfigError("generator: resblock kernels and dilations required");
  for (int k : resblock_kernels)
    if (k < 1 || k % 2 == 0) throw ConfigError("generator: resblock kernels must be odd");
  for (int d : resblock_dilations)
    if (d < 1) throw ConfigError("generator: dilations must be positive");
  if (base_channels < 1) throw ConfigError("generator: base_channels must be positive");
}

GeneratorConfig generator_preset(const std::string& name) {
  GeneratorConfig c;
  if (name == "tiny") {
    c.base_channels = 32;
  } else if (name == "desk") {
    c.base_channels = 64;
  } else if (name == "paper") {
    c.base_channels = 512;
  } else if (name == "paper-literal") {
    c.base_channels = 512;
    c.upsample_rates = {3, 4, 5, 8};
    c.conditioning_rate = 50.0;
  } else {
    throw ConfigError("unknown generator preset: " + name);
  }
  return c;
}

Generator::Generator(int in_channels, const GeneratorConfig& cfg,
                     std::uint64_t seed)
    : in_channels_(in_channels), cfg_(cfg) {
  cfg_.validate();
  if (in_channels < 1) throw std::invalid_argument("generator: in_channels < 1");
  Rng rng(mix_seed(seed, 0x6e6eu));
  const auto base = static_cast<std::size_t>(cfg.base_channels);
  pre_ = nn::WnConv1d(in_channels, base, 7, same_pad(7, 1),
                      default_std(static_cast<std::size_t>(in_channels) * 7), rng);
  std::size_t ch = base;
  for (int rate : cfg.upsample_rates) {
    Stage st;
    // Halved per stage, floored at one channel.
    const std::size_t next = std::max<std::size_t>(1, ch / 2);
    st.up = nn::WnConvTranspose1d(ch, next, static_cast<std::size_t>(rate),
                                  kGenInitStd, rng);
    ch = next;
    for (int k : cfg.resblock_kernels) {
      ResBlock rb;
      const auto ku = static_cast<std::size_t>(k);
      for (int d : cfg.resblock_dilations) {
        rb.convs1.emplace_back(ch, ch, ku, same_pad(ku, static_cast<std::size_t>(d)),
                               kGenInitStd, rng);
        rb.convs2.emplace_back(ch, ch, ku, same_pad(ku, 1), kGenInitStd, rng);
      }
      st.blocks.push_back(std::move(rb));
    }
    stages_.push_back(std::move(st));
  }
  post_ = nn::WnConv1d(ch, 1, 7, same_pad(7, 1), kGenInitStd, rng);
}

nn::Tensor Generator::forward(const nn::Tensor& cond) const {
  if (cond.rank() != 3 || cond.dim(1) != static_cast<std::size_t>(in_channels_))
    throw std::invalid_argument(
        "generator: conditioning width " +
        (cond.rank() == 3 ? std::to_string(cond.dim(1)) : nn::shape_str(cond.shape())) +
        " does not match generator input width " + std::to_string(in_channels_));
  nn::Tensor x = pre_.forward(cond);
  for (const Stage& st : stages_) {
    x = st.up.forward(nn::leaky_relu(x, kSlope));
    nn::Tensor sum;
    for (const ResBlock& rb : st.blocks) {
      nn::Tensor h = x;
      for (std::size_t i = 0; i < rb.convs1.size(); ++i) {
        nn::Tensor t = rb.convs1[i].forward(nn::leaky_relu(h, kSlope));
        t = rb.convs2[i].forward(nn::leaky_relu(t, kSlope));
        h = nn::add(t, h);
      }
      sum = sum.defined() ? nn::add(sum, h) : h;
    }
    x = nn::scale(sum, 1.0 / static_cast<double>(st.blocks.size()));
  }
  x = post_.forward(nn::leaky_relu(x, kPostSlope));
  return nn::tanh(x);
}

void Generator::collect(nn::ParamList& out, const std::string& prefix) const {
  pre_.collect(out, prefix + ".pre");
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const std::string sp = prefix + ".up" + std::to_string(i);
    stages_[i].up.collect(out, sp);
    for (std::size_t j = 0; j < stages_[i].blocks.size(); ++j) {
      const auto& rb = stages_[i].blocks[j];
      const std::string bp = sp + ".res" + std::to_string(j);
      for (std::size_t k = 0; k < rb.convs1.size(); ++k) {
        rb.convs1[k].collect(out, bp + ".c1_" + std::to_string(k));
        rb.convs2[k].collect(out, bp + ".c2_" + std::to_string(k));
      }
    }
  }
  post_.collect(out, prefix + ".post");
}

void DiscriminatorConfig::validate() const {
  if (mpd_periods.empty() && msd_scales.empty())
    throw ConfigError("discriminators: no sub-discriminators configured");
  for (int p : mpd_periods)
    if (p < 1) throw ConfigError("discriminators: periods must be positive");
  for (std::size_t i = 0; i < mpd_periods.size(); ++i)
    for (std::size_t j = i + 1; j < mpd_periods.size(); ++j)
      if (std::gcd(mpd_periods[i], mpd_periods[j]) != 1)
        throw ConfigError("discriminators: periods must be pairwise coprime");
  for (std::size_t i = 0; i < msd_scales.size(); ++i)
    if (msd_scales[i] != (1 << i))
      throw ConfigError("discriminators: scales must be 1, 2, 4, ...");
  if (mpd_channels.size() != 4)
    throw ConfigError("discriminators: mpd_channels needs 4 entries");
  if (msd_channels.size() != 7 || msd_groups.size() != 7)
    throw ConfigError("discriminators: msd_channels and msd_groups need 7 entries");
  int in = 1;
  for (std::size_t i = 0; i < 7; ++i) {
    const int g = msd_groups[i], out = msd_channels[i];
    if (g < 1 || out < 1 || in % g != 0 || out % g != 0)
      throw ConfigError("discriminators: msd layer " + std::to_string(i) +
                        " channels not divisible by its groups");
    in = out;
  }
  for (int c : mpd_channels)
    if (c < 1) throw ConfigError("discriminators: channels must be positive");
}

DiscriminatorConfig tiny_discriminators() {
  DiscriminatorConfig c;
  c.mpd_channels = {8, 16, 32, 32};
  c.msd_channels = {8, 8, 16, 16, 32, 32, 32};
  c.msd_groups = {1, 4, 4, 4, 4, 4, 1};
  return c;
}

FoldShape period_fold_shape(std::size_t length, std::size_t period) {
  return {(length + period - 1) / period, period};
}

std::size_t pooled_length(std::size_t length) { return (length + 2 - 4) / 2 + 1; }

PeriodDiscriminator::PeriodDiscriminator(int period,
                                         const std::vector<int>& channels,
                                         Rng& rng)
    : period_(period) {
  std::size_t in = 1;
  for (int c : channels) {
    const auto out = static_cast<std::size_t>(c);
    convs_.emplace_back(in, out, 5, same_pad(5, 1, 3), default_std(in * 5), rng);
    in = out;
  }
  convs_.emplace_back(in, in, 5, same_pad(5, 1), default_std(in * 5), rng);
  post_ = nn::WnConv1d(in, 1, 3, same_pad(3, 1), default_std(in * 3), rng);
}

DiscOutput PeriodDiscriminator::forward(const nn::Tensor& wave) const {
  DiscOutput out;
  nn::Tensor x = nn::period_fold(wave, static_cast<std::size_t>(period_));
  for (const auto& c : convs_) {
    x = nn::leaky_relu(c.forward(x), kSlope);
    out.features.push_back(x);
  }
  x = post_.forward(x);
  out.features.push_back(x);
  out.score = nn::flatten(x);
  return out;
}

void PeriodDiscriminator::collect(nn::ParamList& out,
                                  const std::string& prefix) const {
  for (std::size_t i = 0; i < convs_.size(); ++i)
    convs_[i].collect(out, prefix + ".conv" + std::to_string(i));
  post_.collect(out, prefix + ".post");
}

ScaleDiscriminator::ScaleDiscriminator(const std::vector<int>& channels,
                                       const std::vector<int>& groups,
                                       Rng& rng) {
  static constexpr std::size_t kKernels[7] = {15, 41, 41, 41, 41, 41, 5};
  static constexpr std::size_t kStrides[7] = {1, 2, 2, 4, 4, 1, 1};
  std::size_t in = 1;
  for (std::size_t i = 0; i < 7; ++i) {
    const auto out = static_cast<std::size_t>(channels[i]);
    const auto g = static_cast<std::size_t>(groups[i]);
    convs_.emplace_back(in, out, kKernels[i], same_pad(kKernels[i], 1, kStrides[i], g),
                        default_std(in / g * kKernels[i]), rng);
    in = out;
  }
  post_ = nn::WnConv1d(in, 1, 3, same_pad(3, 1), default_std(in * 3), rng);
}

DiscOutput ScaleDiscriminator::forward(const nn::Tensor& wave) const {
  DiscOutput out;
  nn::Tensor x = wave;
  for (const auto& c : convs_) {
    x = nn::leaky_relu(c.forward(x), kSlope);
    out.features.push_back(x);
  }
  x = post_.forward(x);
  out.features.push_back(x);
  out.score = nn::flatten(x);
  return out;
}

void ScaleDiscriminator::collect(nn::ParamList& out,
                                 const std::string& prefix) const {
  for (std::size_t i = 0; i < convs_.size(); ++i)
    convs_[i].collect(out, prefix + ".conv" + std::to_string(i));
  post_.collect(out, prefix + ".post");
}

Discriminators::Discriminators(const DiscriminatorConfig& cfg,
                               std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  Rng rng(mix_seed(seed, 0xd15cu));
  for (int p : cfg.mpd_periods) mpd_.emplace_back(p, cfg.mpd_channels, rng);
  for (std::size_t i = 0; i < cfg.msd_scales.size(); ++i)
    msd_.emplace_back(cfg.msd_channels, cfg.msd_groups, rng);
}

std::vector<DiscOutput> Discriminators::forward_mpd(const nn::Tensor& wave) const {
  std::vector<DiscOutput> out;
  for (const auto& d : mpd_) out.push_back(d.forward(wave));
  return out;
}

std::vector<DiscOutput> Discriminators::forward_msd(const nn::Tensor& wave) const {
  std::vector<DiscOutput> out;
  nn::Tensor x = wave;
  for (std::size_t i = 0; i < msd_.size(); ++i) {
    if (i > 0) x = nn::avg_pool1d(x, 4, 2, 1);
    out.push_back(msd_[i].forward(x));
  }
  return out;
}

std::vector<DiscOutput> Discriminators::forward(const nn::Tensor& wave) const {
  if (wave.rank() != 3 || wave.dim(1) != 1 || wave.dim(2) == 0)
    throw std::invalid_argument("discriminators: expected non-empty [N, 1, L] input");
  auto out = forward_mpd(wave);
  auto s = forward_msd(wave);
  out.insert(out.end(), std::make_move_iterator(s.begin()),
             std::make_move_iterator(s.end()));
  return out;
}

void Discriminators::collect(nn::ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < mpd_.size(); ++i)
    mpd_[i].collect(out, prefix + ".mpd" + std::to_string(mpd_[i].period()));
  for (std::size_t i = 0; i < msd_.size(); ++i)
    msd_[i].collect(out, prefix + ".msd" + std::to_string(i));
}

void Discriminators::set_constant_output(double value) {
  auto fix = [value](nn::WnConv1d& post) {
    for (auto& g : post.gain().mutable_data()) g = 0.0;
    for (auto& b : post.bias().mutable_data()) b = value;
  };
  for (auto& d : mpd_) fix(d.post());
  for (auto& d : msd_) fix(d.post());
}

}  // namespace svc
