#include "svc/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "svc/error.hpp"

namespace svc {

using nlohmann::json;

int RunConfig::f0_decimation() const {
  const double r = tracker.frame_rate / generator.conditioning_rate;
  return static_cast<int>(std::lround(r));
}

int RunConfig::content_repeat() const {
  const double r = generator.conditioning_rate / kContentRate;
  return static_cast<int>(std::lround(r));
}

void RunConfig::validate() const {
  if (sample_rate != 24000)
    throw ConfigError("sample_rate must be 24000, got " + std::to_string(sample_rate));
  if (mel.sample_rate != sample_rate)
    throw ConfigError("mel.sample_rate must equal sample_rate");
  if (mel.hop < 1 || mel.fft_size < mel.window || mel.window < 1 || mel.bands < 1)
    throw ConfigError("mel: inconsistent fft/window/hop/bands");
  if (!(mel.fmax > mel.fmin) || mel.fmax > mel.sample_rate / 2.0)
    throw ConfigError("mel: need fmin < fmax <= sample_rate / 2");
  if (!(tracker.fmin > 0.0 && tracker.fmax > tracker.fmin))
    throw ConfigError("tracker: need 0 < fmin < fmax");
  generator.validate(sample_rate);
  discriminators.validate();

  const double dec = tracker.frame_rate / generator.conditioning_rate;
  if (dec < 1.0 || std::abs(dec - std::round(dec)) > 1e-9)
    throw ConfigError("conditioning rate must divide the tracker frame rate");
  const double rep = generator.conditioning_rate / kContentRate;
  if (rep < 1.0 || std::abs(rep - std::round(rep)) > 1e-9)
    throw ConfigError("conditioning rate must be a multiple of the content rate");

  if (encoder_dims.levels < 2 || encoder_dims.dim < 1 || encoder_dims.branches < 1 ||
      encoder_dims.width < 1)
    throw ConfigError("encoder dims must be positive (levels >= 2)");
  if (content.dim < 1) throw ConfigError("content.dim must be positive");
  if (singer_count < 1 || singer_dim < 1)
    throw ConfigError("singer count and dim must be positive");
  if (generator_input != conditioning_width())
    throw ConfigError("width mismatch: generator input is " +
                      std::to_string(generator_input) + " but F + D + S = " +
                      std::to_string(encoder_dims.dim) + " + " +
                      std::to_string(content.dim) + " + " +
                      std::to_string(singer_dim) + " = " +
                      std::to_string(conditioning_width()));
  if (normalization.std < 0.0) throw ConfigError("normalization std must be >= 0");

  const auto& t = train;
  if (!(t.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (t.lambda_recon < 0.0 || t.lambda_fm < 0.0)
    throw ConfigError("loss weights must be non-negative");
  if (!(t.beta1 >= 0.0 && t.beta1 < 1.0 && t.beta2 >= 0.0 && t.beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (!(t.lr_decay > 0.0 && t.lr_decay <= 1.0))
    throw ConfigError("lr_decay must lie in (0, 1]");
  if (t.batch_size < 1 || t.segment_frames < 1 || t.steps < 0 ||
      t.checkpoint_interval < 0 || t.steps_per_epoch < 0)
    throw ConfigError("train: batch_size, segment_frames must be positive");
}

RunConfig default_config() {
  RunConfig c;
  c.encoder_dims = {400, 256, 10, 3};
  c.content.dim = 64;
  c.singer_dim = 128;
  c.generator_preset = "desk";
  c.generator = generator_preset("desk");
  c.generator_input = c.conditioning_width();
  return c;
}

RunConfig tiny_config() {
  RunConfig c;
  c.encoder_dims = {400, 32, 10, 3};
  c.content.dim = 64;
  c.singer_dim = 16;
  c.generator_preset = "tiny";
  c.generator = generator_preset("tiny");
  c.generator_input = c.conditioning_width();
  c.discriminators = tiny_discriminators();
  return c;
}

namespace {

json mel_json(const MelConfig& m) {
  return {{"sample_rate", m.sample_rate}, {"fft_size", m.fft_size},
          {"hop", m.hop},                 {"window", m.window},
          {"bands", m.bands},             {"fmin", m.fmin},
          {"fmax", m.fmax},               {"floor", m.floor}};
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const RunConfig& c) {
  json j;
  j["sample_rate"] = c.sample_rate;
  j["mel"] = mel_json(c.mel);
  j["tracker"] = {{"fmin", c.tracker.fmin},
                  {"fmax", c.tracker.fmax},
                  {"threshold", c.tracker.threshold},
                  {"window_seconds", c.tracker.window_seconds},
                  {"frame_rate", c.tracker.frame_rate}};
  j["normalization"] = {{"mean_hz", c.normalization.mean},
                        {"std_hz", c.normalization.std},
                        {"voiced_frames", c.normalization.voiced_frames}};
  j["encoder"] = {{"kind", to_string(c.encoder)},
                  {"levels", c.encoder_dims.levels},
                  {"dim", c.encoder_dims.dim},
                  {"branches", c.encoder_dims.branches},
                  {"width", c.encoder_dims.width}};
  j["content"] = {{"provider", to_string(c.content.kind)},
                  {"dim", c.content.dim},
                  {"seed", c.content.seed}};
  j["singers"] = {{"count", c.singer_count}, {"dim", c.singer_dim}};
  const auto& g = c.generator;
  j["generator"] = {{"preset", c.generator_preset},
                    {"upsample_rates", g.upsample_rates},
                    {"resblock_kernels", g.resblock_kernels},
                    {"resblock_dilations", g.resblock_dilations},
                    {"base_channels", g.base_channels},
                    {"conditioning_rate", g.conditioning_rate},
                    {"input_channels", c.generator_input}};
  const auto& d = c.discriminators;
  j["discriminators"] = {{"mpd_periods", d.mpd_periods},
                         {"msd_scales", d.msd_scales},
                         {"mpd_channels", d.mpd_channels},
                         {"msd_channels", d.msd_channels},
                         {"msd_groups", d.msd_groups}};
  const auto& t = c.train;
  j["train"] = {{"lr", t.lr},
                {"lambda_recon", t.lambda_recon},
                {"lambda_fm", t.lambda_fm},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"lr_decay", t.lr_decay},
                {"steps_per_epoch", t.steps_per_epoch},
                {"batch_size", t.batch_size},
                {"segment_frames", t.segment_frames},
                {"steps", t.steps},
                {"checkpoint_interval", t.checkpoint_interval},
                {"seed", t.seed},
                {"freeze_discriminators", t.freeze_discriminators}};
  j["paths"] = {{"manifest", c.paths.manifest},
                {"registry", c.paths.registry},
                {"out_dir", c.paths.out_dir}};
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c = default_config();
  try {
    // A preset name picks the base generator and discriminator schedule;
    // explicit fields below override it.
    if (j.contains("generator") && j["generator"].contains("preset")) {
      c.generator_preset = j["generator"]["preset"].get<std::string>();
      c.generator = generator_preset(c.generator_preset);
      if (c.generator_preset == "tiny") c = tiny_config();
    }
    get(j, "sample_rate", c.sample_rate);
    if (j.contains("mel")) {
      const auto& m = j["mel"];
      get(m, "sample_rate", c.mel.sample_rate);
      get(m, "fft_size", c.mel.fft_size);
      get(m, "hop", c.mel.hop);
      get(m, "window", c.mel.window);
      get(m, "bands", c.mel.bands);
      get(m, "fmin", c.mel.fmin);
      get(m, "fmax", c.mel.fmax);
      get(m, "floor", c.mel.floor);
    }
    if (j.contains("tracker")) {
      const auto& t = j["tracker"];
      get(t, "fmin", c.tracker.fmin);
      get(t, "fmax", c.tracker.fmax);
      get(t, "threshold", c.tracker.threshold);
      get(t, "window_seconds", c.tracker.window_seconds);
      get(t, "frame_rate", c.tracker.frame_rate);
    }
    if (j.contains("normalization")) {
      const auto& n = j["normalization"];
      get(n, "mean_hz", c.normalization.mean);
      get(n, "std_hz", c.normalization.std);
      get(n, "voiced_frames", c.normalization.voiced_frames);
    }
    if (j.contains("encoder")) {
      const auto& e = j["encoder"];
      if (e.contains("kind"))
        c.encoder = encoder_kind_from_string(e["kind"].get<std::string>());
      get(e, "levels", c.encoder_dims.levels);
      get(e, "dim", c.encoder_dims.dim);
      get(e, "branches", c.encoder_dims.branches);
      get(e, "width", c.encoder_dims.width);
    }
    if (j.contains("content")) {
      const auto& e = j["content"];
      if (e.contains("provider"))
        c.content.kind = provider_kind_from_string(e["provider"].get<std::string>());
      get(e, "dim", c.content.dim);
      get(e, "seed", c.content.seed);
    }
    if (j.contains("singers")) {
      get(j["singers"], "count", c.singer_count);
      get(j["singers"], "dim", c.singer_dim);
    }
    c.generator_input = c.conditioning_width();
    if (j.contains("generator")) {
      const auto& g = j["generator"];
      get(g, "upsample_rates", c.generator.upsample_rates);
      get(g, "resblock_kernels", c.generator.resblock_kernels);
      get(g, "resblock_dilations", c.generator.resblock_dilations);
      get(g, "base_channels", c.generator.base_channels);
      get(g, "conditioning_rate", c.generator.conditioning_rate);
      get(g, "input_channels", c.generator_input);
    }
    if (j.contains("discriminators")) {
      const auto& d = j["discriminators"];
      get(d, "mpd_periods", c.discriminators.mpd_periods);
      get(d, "msd_scales", c.discriminators.msd_scales);
      get(d, "mpd_channels", c.discriminators.mpd_channels);
      get(d, "msd_channels", c.discriminators.msd_channels);
      get(d, "msd_groups", c.discriminators.msd_groups);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      get(t, "lr", c.train.lr);
      get(t, "lambda_recon", c.train.lambda_recon);
      get(t, "lambda_fm", c.train.lambda_fm);
      get(t, "beta1", c.train.beta1);
      get(t, "beta2", c.train.beta2);
      get(t, "lr_decay", c.train.lr_decay);
      get(t, "steps_per_epoch", c.train.steps_per_epoch);
      get(t, "batch_size", c.train.batch_size);
      get(t, "segment_frames", c.train.segment_frames);
      get(t, "steps", c.train.steps);
      get(t, "checkpoint_interval", c.train.checkpoint_interval);
      get(t, "seed", c.train.seed);
      get(t, "freeze_discriminators", c.train.freeze_discriminators);
    }
    if (j.contains("paths")) {
      get(j["paths"], "manifest", c.paths.manifest);
      get(j["paths"], "registry", c.paths.registry);
      get(j["paths"], "out_dir", c.paths.out_dir);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write config: " + path.string());
  out << to_json(cfg).dump(2) << '\n';
}

std::uint64_t fingerprint(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("paths");
  j["train"].erase("steps");
  j["train"].erase("checkpoint_interval");
  // nlohmann::json objects are key-sorted, so dump() is canonical.
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

}  // namespace svc
