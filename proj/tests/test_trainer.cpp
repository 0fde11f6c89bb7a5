#include "doctest.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "helpers.hpp"
#include "svc/checkpoint.hpp"
#include "svc/error.hpp"
#include "svc/trainer.hpp"
#include "synth.hpp"

using namespace svc;

namespace {

struct Setup {
  RunConfig cfg;
  std::vector<PreparedClip> clips;
};

Setup small_setup(std::uint64_t seed = 1, int singers = 1) {
  Setup s;
  s.cfg = tiny_config();
  s.cfg.train.seed = seed;
  s.cfg.train.segment_frames = 8;
  s.cfg.singer_count = singers;
  std::vector<TrainingClip> raw;
  for (int id = 0; id < singers; ++id) raw.push_back(analyze_clip(s.cfg, test::vowel(0.25 + 0.05 * id), id));
  std::vector<F0Contour> contours;
  for (const auto& r : raw) contours.push_back(r.f0);
  s.cfg.normalization = compute_stats(contours);
  for (const auto& r : raw) s.clips.push_back(prepare_clip(s.cfg, r, s.cfg.normalization));
  return s;
}

std::uint64_t hash_params(const nn::ParamList& ps) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : ps)
    for (double v : p.tensor.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      h = (h ^ bits) * 0x100000001b3ULL;
    }
  return h;
}

bool same_losses(const StepLosses& a, const StepLosses& b) {
  return a.adv_d == b.adv_d && a.adv_g == b.adv_g && a.fm == b.fm && a.mel == b.mel && a.g_total == b.g_total;
}

double grad_mass(const nn::ParamList& ps, const std::string& prefix) {
  double m = 0;
  for (const auto& p : ps)
    if (p.name.rfind(prefix, 0) == 0)
      for (double g : p.tensor.grad()) m += std::abs(g);
  return m;
}

}  // namespace

TEST_CASE("prepared clips are aligned to the conditioning grid") {
  const auto s = small_setup();
  const auto& c = s.clips[0];
  CHECK(c.frames == 50);
  CHECK(c.bins.bins.size() == c.frames);
  CHECK(c.content.rows == c.frames);
  CHECK(c.content.cols == 64);
  CHECK(c.audio.size() == c.frames * 120);
  for (int b : c.bins.bins) {
    CHECK(b >= 0);
    CHECK(b < 400);
  }
}

TEST_CASE("cropped conditioning matches the full utterance") {
  const auto s = small_setup();
  const Model m = build_model(s.cfg);
  const auto full = clip_conditioning(m, s.clips[0], 0, 50);
  const auto crop = clip_conditioning(m, s.clips[0], 30, 10);
  REQUIRE(crop.shape() == nn::Shape{1, 112, 10});
  double worst = 0;
  for (std::size_t ch = 0; ch < 112; ++ch)
    for (std::size_t t = 0; t < 10; ++t)
      worst = std::max(worst, std::abs(crop.data()[ch * 10 + t] - full.data()[ch * 50 + 30 + t]));
  CHECK(worst == 0.0);
}

TEST_CASE("training steps are finite and deterministic") {
  auto s = small_setup();
  Trainer a(s.cfg, s.clips), b(s.cfg, s.clips);
  for (int i = 0; i < 10; ++i) {
    const auto la = a.step(), lb = b.step();
    CHECK(std::isfinite(la.adv_d));
    CHECK(std::isfinite(la.g_total));
    CHECK(same_losses(la, lb));
  }
  CHECK(a.steps_done() == 10);

  auto other = s.cfg;
  other.train.seed = 2;
  Trainer c(other, s.clips);
  Trainer d(s.cfg, s.clips);
  CHECK_FALSE(same_losses(c.step(), d.step()));
}

TEST_CASE("half-steps touch only their own parameters") {
  auto s = small_setup();
  Trainer t(s.cfg, s.clips);
  const auto gp = t.model().generator_params();
  const auto dp = t.model().discriminator_params();
  for (int i = 0; i < 3; ++i) {
    const auto batch = t.sample_batch();
    const auto fake = t.generate(batch);
    const auto g0 = hash_params(gp), d0 = hash_params(dp);
    t.discriminator_step(batch, fake);
    CHECK(hash_params(gp) == g0);
    CHECK(hash_params(dp) != d0);
    const auto d1 = hash_params(dp);
    t.generator_step(batch, fake);
    CHECK(hash_params(dp) == d1);
    CHECK(hash_params(gp) != g0);
    t.set_steps_done(t.steps_done() + 1);
  }
}

TEST_CASE("generator step sends gradient to the encoder and singer table") {
  auto s = small_setup(3, 2);
  Trainer t(s.cfg, s.clips);
  const auto batch = t.sample_batch();
  t.generator_step(batch, t.generate(batch));
  const auto gp = t.model().generator_params();
  CHECK(grad_mass(gp, "f0enc") > 0);
  CHECK(grad_mass(gp, "singer") > 0);
  CHECK(grad_mass(gp, "gen") > 0);
}

TEST_CASE("with only the adversarial term and a constant discriminator the loss ignores the target") {
  auto s = small_setup();
  s.cfg.train.lambda_recon = 0;
  s.cfg.train.lambda_fm = 0;
  s.cfg.train.freeze_discriminators = true;
  Trainer t(s.cfg, s.clips);
  t.model().discriminators.set_constant_output(0.5);
  auto batch = t.sample_batch();
  const auto fake = t.generate(batch);
  const auto a = t.generator_step(batch, fake);
  for (double& v : batch.audio.mutable_data()) v = -0.5 * v + 0.01;
  batch.mels[0] = MelAnalyzer(s.cfg.mel).compute(batch.audio.data());
  const auto b = t.generator_step(batch, fake);
  // Each of the 8 sub-discriminators contributes (0.5 - 1)^2.
  CHECK(a.g_total == doctest::Approx(8 * 0.25));
  CHECK(a.g_total == b.g_total);
  CHECK(a.mel != b.mel);
}

TEST_CASE("learning rate decays per epoch") {
  auto s = small_setup(1, 2);
  s.cfg.train.lr_decay = 0.5;
  Trainer t(s.cfg, s.clips);
  CHECK(t.steps_per_epoch() == 2);
  CHECK(t.current_lr() == 2e-4);
  t.set_steps_done(1);
  CHECK(t.current_lr() == 2e-4);
  t.set_steps_done(2);
  CHECK(t.current_lr() == 1e-4);
  t.set_steps_done(7);
  CHECK(t.current_lr() == 2e-4 / 8);
}

TEST_CASE("non-finite losses raise a divergence error") {
  auto s = small_setup();
  Trainer t(s.cfg, s.clips);
  t.step();
  t.step();
  auto ps = t.model().generator_params();
  for (auto& p : ps)
    if (p.name.rfind("gen", 0) == 0) {
      for (double& v : p.tensor.mutable_data()) v = std::numeric_limits<double>::quiet_NaN();
      break;
    }
  try {
    t.step();
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 2);
  }
}

TEST_CASE("trainer preconditions") {
  auto s = small_setup();
  auto no_stats = s.cfg;
  no_stats.normalization = {};
  CHECK_THROWS_AS(Trainer(no_stats, s.clips), ConfigError);
  auto long_seg = s.cfg;
  long_seg.train.segment_frames = 51;
  CHECK_THROWS_AS(Trainer(long_seg, s.clips), DataError);
  auto bad_id = s.clips;
  bad_id[0].singer_id = 1;
  CHECK_THROWS_AS(Trainer(s.cfg, bad_id), DataError);

  s.cfg.train.steps = 0;
  Trainer t(s.cfg, s.clips);
  CHECK(overfit_single_clip(t).empty());
}

TEST_CASE("manifest parsing") {
  const auto dir = test::scratch_dir("trainer_manifest");
  {
    std::ofstream m(dir / "m.jsonl");
    m << R"({"wav_path": "a.wav", "singer_id": 0, "kind": "singing", "f0_cache": "a.f0"})" << "\n\n";
    m << R"({"wav_path": "/abs/b.wav", "singer_id": 3, "kind": "speech", "feature_cache": "f/b.feat"})" << "\n";
  }
  const auto e = load_manifest(dir / "m.jsonl");
  REQUIRE(e.size() == 2);
  CHECK(e[0].wav_path == dir / "a.wav");
  CHECK(e[0].f0_cache == dir / "a.f0");
  CHECK(e[0].feature_cache.empty());
  CHECK(e[1].wav_path == "/abs/b.wav");
  CHECK(e[1].kind == "speech");
  CHECK(e[1].feature_cache == dir / "f/b.feat");

  std::ofstream(dir / "bad.jsonl") << R"({"wav_path": "a.wav", "singer_id": 0, "kind": "humming"})" << "\n";
  CHECK_THROWS_AS(load_manifest(dir / "bad.jsonl"), DataError);
  CHECK_THROWS_AS(load_manifest(dir / "missing.jsonl"), DataError);
}

TEST_CASE("checkpoint round trip, fingerprint and resume") {
  const auto dir = test::scratch_dir("trainer_ckpt");
  auto s = small_setup();
  Trainer a(s.cfg, s.clips);
  for (int i = 0; i < 3; ++i) a.step();
  save_checkpoint(a, dir / "a.ckpt");

  const auto h = read_checkpoint_header(dir / "a.ckpt");
  CHECK(h.step == 3);
  CHECK(h.fingerprint == fingerprint(s.cfg));

  Trainer b(s.cfg, s.clips);
  load_checkpoint(b, dir / "a.ckpt");
  CHECK(b.steps_done() == 3);
  CHECK(hash_params(b.model().generator_params()) == hash_params(a.model().generator_params()));
  CHECK(hash_params(b.model().discriminator_params()) == hash_params(a.model().discriminator_params()));

  for (int i = 0; i < 5; ++i) CHECK(same_losses(a.step(), b.step()));

  auto edited = s.cfg;
  edited.generator.base_channels = 16;
  Trainer c(edited, s.clips);
  try {
    load_checkpoint(c, dir / "a.ckpt");
    FAIL("expected fingerprint error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("fingerprint") != std::string::npos);
  }
  CHECK_THROWS_AS(load_model(edited, dir / "a.ckpt"), ConfigError);

  const Model m = load_model(s.cfg, dir / "a.ckpt");
  Trainer fresh(s.cfg, s.clips);
  load_checkpoint(fresh, dir / "a.ckpt");
  CHECK(hash_params(m.generator_params()) == hash_params(fresh.model().generator_params()));

  {
    std::ofstream f(dir / "junk.ckpt", std::ios::binary);
    f << "SVCCKPT0 garbage";
  }
  CHECK_THROWS_AS(load_checkpoint(b, dir / "junk.ckpt"), DataError);
  std::filesystem::copy_file(dir / "a.ckpt", dir / "cut.ckpt");
  std::filesystem::resize_file(dir / "cut.ckpt", std::filesystem::file_size(dir / "a.ckpt") - 100);
  CHECK_THROWS_AS(load_checkpoint(b, dir / "cut.ckpt"), DataError);

  auto unset = s.cfg;
  unset.normalization = {};
  const auto resolved = resolve_config(unset, h);
  CHECK(resolved.normalization.mean == s.cfg.normalization.mean);
  CHECK(fingerprint(resolved) == h.fingerprint);
}
