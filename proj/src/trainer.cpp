#include "svc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "svc/error.hpp"
#include "svc/nn/ops.hpp"
#include "svc/rng.hpp"

namespace svc {

namespace {

// Marks parameters as constants for the lifetime of the guard so a backward
// pass does not spend time on their gradients.
class FreezeGuard {
 public:
  explicit FreezeGuard(const nn::ParamList& params) : params_(params) {
    for (const auto& p : params_) p.tensor.node()->requires_grad = false;
  }
  ~FreezeGuard() {
    for (const auto& p : params_) p.tensor.node()->requires_grad = true;
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  const nn::ParamList& params_;
};

void check_finite(double v, const char* what, std::int64_t step) {
  if (!std::isfinite(v))
    throw DivergenceError(step, std::string(what) + " is " + std::to_string(v));
}

}  // namespace

nn::ParamList Model::generator_params() const {
  nn::ParamList out;
  encoder.collect(out, "f0enc");
  singers.collect(out, "singer");
  generator.collect(out, "gen");
  return out;
}

nn::ParamList Model::discriminator_params() const {
  nn::ParamList out;
  discriminators.collect(out, "disc");
  return out;
}

Model build_model(const RunConfig& cfg) {
  cfg.validate();
  const std::uint64_t seed = cfg.train.seed;
  Model m;
  m.encoder = F0Encoder(cfg.encoder, cfg.encoder_dims, mix_seed(seed, 1));
  m.singers = SingerEmbedding(static_cast<std::size_t>(cfg.singer_count),
                              static_cast<std::size_t>(cfg.singer_dim),
                              mix_seed(seed, 2));
  m.generator = Generator(cfg.generator_input, cfg.generator, mix_seed(seed, 3));
  m.discriminators = Discriminators(cfg.discriminators, mix_seed(seed, 4));
  return m;
}

PreparedClip prepare_clip(const RunConfig& cfg, const TrainingClip& clip,
                          const F0Stats& normalization) {
  if (clip.audio.sample_rate != cfg.sample_rate)
    throw DataError("training audio must be sampled at " +
                    std::to_string(cfg.sample_rate) + " Hz");
  const F0Contour f0 = decimate(clip.f0, cfg.f0_decimation());
  const Matrix content = upsample_features(clip.content, cfg.generator.conditioning_rate);
  if (content.cols != cfg.content.dim)
    throw DataError("content dim " + std::to_string(content.cols) +
                    " does not match configured " + std::to_string(cfg.content.dim));
  const std::size_t ta = f0.size(), tb = content.rows;
  if ((ta > tb ? ta - tb : tb - ta) > kMaxStreamSkew)
    throw DataError("stream misalignment: " + std::to_string(ta) + " f0 frames vs " +
                    std::to_string(tb) + " content frames");

  PreparedClip p;
  p.frames = std::min(ta, tb);
  p.singer_id = clip.singer_id;
  const auto norm = normalize_f0(f0, normalization);
  p.bins = quantize_f0(std::span(norm).first(p.frames), cfg.encoder_dims.levels);
  p.content = Matrix(p.frames, content.cols);
  std::copy_n(content.data.begin(), p.frames * content.cols, p.content.data.begin());
  const std::size_t n = p.frames * static_cast<std::size_t>(cfg.hop());
  p.audio.assign(n, 0.0);
  std::copy_n(clip.audio.samples.begin(), std::min(n, clip.audio.size()), p.audio.begin());
  return p;
}

TrainingClip analyze_clip(const RunConfig& cfg, const Waveform& audio24k,
                          int singer_id) {
  TrainingClip c;
  c.audio = resample(audio24k, cfg.sample_rate);
  c.f0 = extract_f0(c.audio, cfg.tracker);
  c.content = cfg.content.provide(c.audio);
  c.singer_id = singer_id;
  return c;
}

nn::Tensor clip_conditioning(const Model& model, const PreparedClip& clip,
                             std::size_t start, std::size_t count) {
  if (start + count > clip.frames)
    throw std::invalid_argument("clip_conditioning: frame range out of bounds");
  const std::size_t reach =
      model.encoder.kind() == EncoderKind::kPbtc
          ? static_cast<std::size_t>(model.encoder.pbtc().reach())
          : 0;
  const std::size_t ctx = std::min(start, reach);
  QuantizedF0 q;
  q.levels = clip.bins.levels;
  q.bins.assign(clip.bins.bins.begin() + static_cast<long>(start - ctx),
                clip.bins.bins.begin() + static_cast<long>(start + count));
  nn::Tensor f0_feat = nn::slice_rows(model.encoder.forward(q), ctx, count);

  const std::size_t d = clip.content.cols;
  std::vector<double> rows(clip.content.data.begin() + static_cast<long>(start * d),
                           clip.content.data.begin() + static_cast<long>((start + count) * d));
  nn::Tensor content = nn::Tensor::constant({count, d}, std::move(rows));
  return assemble_conditioning(f0_feat, content, model.singers.embed(clip.singer_id));
}

Trainer::Trainer(RunConfig cfg, std::vector<PreparedClip> clips)
    : cfg_(std::move(cfg)), clips_(std::move(clips)), mel_(cfg_.mel) {
  cfg_.validate();
  if (!(cfg_.normalization.std > 0.0))
    throw ConfigError("normalization stats missing: f0 mean/std must be set before training");
  if (clips_.empty()) throw DataError("no training clips");
  for (const auto& c : clips_) {
    if (c.frames < static_cast<std::size_t>(cfg_.train.segment_frames))
      throw DataError("clip of " + std::to_string(c.frames) +
                      " frames is shorter than segment_frames " +
                      std::to_string(cfg_.train.segment_frames));
    if (c.singer_id < 0 || c.singer_id >= cfg_.singer_count)
      throw DataError("singer id " + std::to_string(c.singer_id) +
                      " outside configured singer count " +
                      std::to_string(cfg_.singer_count));
  }
  model_ = build_model(cfg_);
  nn::AdamOptions opt;
  opt.lr = cfg_.train.lr;
  opt.beta1 = cfg_.train.beta1;
  opt.beta2 = cfg_.train.beta2;
  adam_g_ = nn::Adam(model_.generator_params(), opt);
  adam_d_ = nn::Adam(model_.discriminator_params(), opt);
}

std::int64_t Trainer::steps_per_epoch() const {
  if (cfg_.train.steps_per_epoch > 0) return cfg_.train.steps_per_epoch;
  const auto n = static_cast<std::int64_t>(clips_.size());
  const auto b = static_cast<std::int64_t>(cfg_.train.batch_size);
  return (n + b - 1) / b;
}

double Trainer::current_lr() const {
  const std::int64_t epoch = step_ / steps_per_epoch();
  return cfg_.train.lr * std::pow(cfg_.train.lr_decay, static_cast<double>(epoch));
}

Batch Trainer::sample_batch() const {
  Rng rng(mix_seed(cfg_.train.seed, 0xba7c0000ULL + static_cast<std::uint64_t>(step_)));
  const auto seg = static_cast<std::size_t>(cfg_.train.segment_frames);
  const auto hop = static_cast<std::size_t>(cfg_.hop());
  Batch b;
  std::vector<nn::Tensor> conds, audio;
  for (int i = 0; i < cfg_.train.batch_size; ++i) {
    const PreparedClip& c = clips_[rng.below(clips_.size())];
    const std::size_t start = rng.below(c.frames - seg + 1);
    conds.push_back(clip_conditioning(model_, c, start, seg));
    std::vector<double> a(c.audio.begin() + static_cast<long>(start * hop),
                          c.audio.begin() + static_cast<long>((start + seg) * hop));
    b.mels.push_back(mel_.compute(a));
    const std::size_t len = a.size();
    audio.push_back(nn::Tensor::constant({1, 1, len}, std::move(a)));
  }
  b.conditioning = nn::stack_batch(conds);
  b.audio = nn::stack_batch(audio);
  return b;
}

nn::Tensor Trainer::generate(const Batch& b) const {
  return model_.generator.forward(b.conditioning);
}

double Trainer::discriminator_step(const Batch& b, const nn::Tensor& fake) {
  const nn::ParamList& dp = adam_d_.params();
  if (cfg_.train.freeze_discriminators) {
    nn::NoGradGuard ng;
    const auto r = model_.discriminators.forward(b.audio);
    const auto f = model_.discriminators.forward(fake.detach());
    const double v = discriminator_adv_loss(scores_of(r), scores_of(f)).item();
    check_finite(v, "discriminator loss", step_);
    return v;
  }
  nn::zero_grads(dp);
  const auto r = model_.discriminators.forward(b.audio);
  const auto f = model_.discriminators.forward(fake.detach());
  nn::Tensor loss = discriminator_adv_loss(scores_of(r), scores_of(f));
  const double v = loss.item();
  check_finite(v, "discriminator loss", step_);
  loss.backward();
  adam_d_.step(current_lr());
  return v;
}

StepLosses Trainer::generator_step(const Batch& b, const nn::Tensor& fake) {
  nn::zero_grads(adam_g_.params());
  FreezeGuard freeze(adam_d_.params());
  std::vector<DiscOutput> real_out;
  {
    nn::NoGradGuard ng;
    real_out = model_.discriminators.forward(b.audio);
  }
  const auto fake_out = model_.discriminators.forward(fake);
  nn::Tensor adv = generator_adv_loss(scores_of(fake_out));
  nn::Tensor fm = feature_matching_loss(real_out, fake_out);
  nn::Tensor mel = mel_l1_loss(fake, b.mels, mel_);
  nn::Tensor total = nn::weighted_sum(
      {adv, fm, mel}, {1.0, cfg_.train.lambda_fm, cfg_.train.lambda_recon});

  StepLosses s;
  s.adv_g = adv.item();
  s.fm = fm.item();
  s.mel = mel.item();
  s.g_total = total.item();
  check_finite(s.g_total, "generator loss", step_);
  if (total.requires_grad()) {
    total.backward();
    adam_g_.step(current_lr());
  }
  return s;
}

StepLosses Trainer::step() {
  const Batch b = sample_batch();
  const nn::Tensor fake = generate(b);
  const double adv_d = discriminator_step(b, fake);
  StepLosses s = generator_step(b, fake);
  s.adv_d = adv_d;
  ++step_;
  return s;
}

double Trainer::evaluate_mel(const PreparedClip& clip) const {
  nn::NoGradGuard ng;
  const nn::Tensor cond = clip_conditioning(model_, clip, 0, clip.frames);
  const nn::Tensor fake = model_.generator.forward(cond);
  const MelSpectrogram ref = mel_.compute(clip.audio);
  return mel_l1_loss(fake, {ref}, mel_).item();
}

std::vector<double> overfit_single_clip(
    Trainer& trainer,
    const std::function<void(std::int64_t, const StepLosses&)>& on_step) {
  if (trainer.clips().size() != 1)
    throw std::invalid_argument("overfit_single_clip: trainer must hold one clip");
  std::vector<double> curve;
  while (trainer.steps_done() < trainer.config().train.steps) {
    const std::int64_t s = trainer.steps_done();
    const StepLosses l = trainer.step();
    curve.push_back(l.mel);
    if (on_step) on_step(s, l);
  }
  return curve;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  const auto base = path.parent_path();
  auto resolve = [&base](const std::string& s) -> std::filesystem::path {
    if (s.empty()) return {};
    std::filesystem::path p(s);
    return p.is_absolute() ? p : base / p;
  };
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.wav_path = resolve(j.at("wav_path").get<std::string>());
      e.singer_id = j.at("singer_id").get<int>();
      e.kind = j.value("kind", std::string("singing"));
      if (e.kind != "singing" && e.kind != "speech")
        throw DataError("kind must be singing or speech");
      e.f0_cache = resolve(j.value("f0_cache", std::string{}));
      e.feature_cache = resolve(j.value("feature_cache", std::string{}));
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("manifest " + path.string() + " line " +
                      std::to_string(lineno) + ": " + ex.what());
    } catch (const DataError& ex) {
      throw DataError("manifest " + path.string() + " line " +
                      std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

TrainingClip load_training_clip(const RunConfig& cfg, const ManifestEntry& e) {
  TrainingClip c;
  c.audio = resample(load_wav(e.wav_path), cfg.sample_rate);
  c.singer_id = e.singer_id;
  c.kind = e.kind;
  if (!e.f0_cache.empty() && std::filesystem::exists(e.f0_cache))
    c.f0 = load_f0_cache(e.f0_cache);
  else
    c.f0 = extract_f0(c.audio, cfg.tracker);
  if (!e.feature_cache.empty() &&
      (cfg.content.kind == ProviderKind::kFile || std::filesystem::exists(e.feature_cache)))
    c.content = load_features(e.feature_cache, cfg.content.dim);
  else
    c.content = cfg.content.provide(c.audio);
  return c;
}

}  // namespace svc
