#include "svc/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "svc/checkpoint.hpp"
#include "svc/error.hpp"

namespace svc {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

F0Contour contour_for(const RunConfig& cfg, const ManifestEntry& e) {
  if (!e.f0_cache.empty() && fs::exists(e.f0_cache)) return load_f0_cache(e.f0_cache);
  return extract_f0(resample(load_wav(e.wav_path), cfg.sample_rate), cfg.tracker);
}

}  // namespace

ExtractSummary cmd_extract_f0(const fs::path& in_dir, const fs::path& out_dir,
                              const TrackerConfig& tracker) {
  const auto wavs = files_with_extension(in_dir, ".wav");
  fs::create_directories(out_dir);
  ExtractSummary s;
  for (const auto& p : wavs) {
    try {
      const Waveform w = load_wav(p);
      const F0Contour c = extract_f0(w, tracker);
      save_f0_cache(c, tracker, out_dir / (p.stem().string() + ".f0"));
      ++s.processed;
    } catch (const DataError& e) {
      s.failed.push_back(p.filename().string() + ": " + e.what());
    }
  }
  return s;
}

StatsResult cmd_singer_stats(const RunConfig& cfg, const fs::path& manifest,
                             const fs::path& out) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest: " + manifest.string());
  std::map<int, std::string> names;
  {
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        if (j.contains("singer_name"))
          names[j.at("singer_id").get<int>()] = j["singer_name"].get<std::string>();
      } catch (const nlohmann::json::exception&) {
        // load_manifest below reports malformed lines.
      }
    }
  }
  const auto entries = load_manifest(manifest);
  std::map<int, std::vector<F0Contour>> by_singer;
  for (const auto& e : entries) by_singer[e.singer_id].push_back(contour_for(cfg, e));

  StatsResult r;
  std::vector<F0Contour> all;
  for (auto& [id, contours] : by_singer) {
    SingerProfile p;
    p.id = id;
    p.name = names.count(id) ? names[id] : "singer" + std::to_string(id);
    try {
      p.stats = compute_stats(contours);
    } catch (const DataError& e) {
      throw DataError("singer " + p.name + " (id " + std::to_string(id) + "): " + e.what());
    }
    r.singers.push_back(p);
    all.insert(all.end(), contours.begin(), contours.end());
  }
  if (!all.empty()) r.global = compute_stats(all);
  save_registry(r.singers, out);
  return r;
}

ExtractSummary cmd_features_extract(const RunConfig& cfg, ProviderKind provider,
                                    const fs::path& in_dir, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  ExtractSummary s;
  FeatureProvider fp = cfg.content;
  fp.kind = provider;
  const auto inputs =
      files_with_extension(in_dir, provider == ProviderKind::kPseudo ? ".wav" : ".feat");
  for (const auto& p : inputs) {
    try {
      const ContentFeatures f =
          provider == ProviderKind::kPseudo ? fp.provide(load_wav(p)) : fp.provide({}, p);
      save_features(f, out_dir / (p.stem().string() + ".feat"));
      ++s.processed;
    } catch (const DataError& e) {
      s.failed.push_back(p.filename().string() + ": " + e.what());
    }
  }
  return s;
}

TrainSummary cmd_train(RunConfig cfg, const std::optional<fs::path>& resume,
                       std::ostream& log) {
  if (resume) cfg = resolve_config(cfg, read_checkpoint_header(*resume));
  cfg.validate();
  if (cfg.paths.manifest.empty()) throw ConfigError("paths.manifest is not set");
  const auto entries = load_manifest(cfg.paths.manifest);
  if (entries.empty()) throw DataError("manifest lists no clips");
  std::vector<TrainingClip> raw;
  for (const auto& e : entries) raw.push_back(load_training_clip(cfg, e));
  if (!(cfg.normalization.std > 0.0)) {
    std::vector<F0Contour> contours;
    for (const auto& c : raw) contours.push_back(c.f0);
    cfg.normalization = compute_stats(contours);
  }
  std::vector<PreparedClip> clips;
  for (const auto& c : raw) clips.push_back(prepare_clip(cfg, c, cfg.normalization));

  const fs::path dir = cfg.paths.out_dir;
  fs::create_directories(dir);
  save_config(cfg, dir / "run_config.json");
  Trainer trainer(cfg, std::move(clips));
  if (resume) load_checkpoint(trainer, *resume);

  TrainSummary s;
  s.loss_log = dir / "losses.csv";
  // Keep the log rows that precede the resume point, then append.
  std::vector<std::string> kept;
  if (resume && fs::exists(s.loss_log)) {
    std::ifstream old(s.loss_log);
    std::string line;
    std::getline(old, line);
    while (std::getline(old, line))
      if (!line.empty() && std::stoll(line.substr(0, line.find(','))) < trainer.steps_done())
        kept.push_back(line);
  }
  std::ofstream csv(s.loss_log, std::ios::trunc);
  if (!csv) throw DataError("cannot write " + s.loss_log.string());
  csv << "step,adv_d,adv_g,fm,mel,g_total,lr\n";
  for (const auto& l : kept) csv << l << '\n';
  csv << std::setprecision(17);

  s.checkpoint = dir / "latest.ckpt";
  const std::int64_t interval = cfg.train.checkpoint_interval;
  while (trainer.steps_done() < cfg.train.steps) {
    const std::int64_t step = trainer.steps_done();
    const double lr = trainer.current_lr();
    const StepLosses l = trainer.step();
    csv << step << ',' << l.adv_d << ',' << l.adv_g << ',' << l.fm << ',' << l.mel << ','
        << l.g_total << ',' << lr << '\n';
    if (interval > 0 && trainer.steps_done() % interval == 0) {
      save_checkpoint(trainer, dir / ("step_" + std::to_string(trainer.steps_done()) + ".ckpt"));
      log << "step " << trainer.steps_done() << " mel " << l.mel << " g " << l.g_total
          << " d " << l.adv_d << '\n';
    }
  }
  save_checkpoint(trainer, s.checkpoint);
  s.steps_done = trainer.steps_done();
  return s;
}

Conversion cmd_convert(const RunConfig& cfg_in, const fs::path& checkpoint,
                       const fs::path& source_wav, const std::string& source_singer,
                       const std::string& target_singer, const fs::path& out_wav,
                       bool utterance_stats) {
  const RunConfig cfg = resolve_config(cfg_in, read_checkpoint_header(checkpoint));
  if (cfg.paths.registry.empty()) throw ConfigError("paths.registry is not set");
  const auto registry = load_registry(cfg.paths.registry);
  const SingerProfile& src = find_singer(registry, source_singer);
  const SingerProfile& tgt = find_singer(registry, target_singer);
  const Model model = load_model(cfg, checkpoint);
  ConvertOptions opt;
  opt.utterance_stats = utterance_stats;
  Conversion c = convert(cfg, model, load_wav(source_wav), src, tgt, opt);
  save_wav(c.audio, out_wav);
  return c;
}

EvalMetrics cmd_eval_report(const RunConfig& cfg_in, const fs::path& checkpoint,
                            const fs::path& clip, int singer_id,
                            const fs::path& out_dir) {
  const RunConfig cfg = resolve_config(cfg_in, read_checkpoint_header(checkpoint));
  const Model model = load_model(cfg, checkpoint);
  return eval_report(cfg, model, load_wav(clip), singer_id, out_dir);
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Singing voice conversion toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Run config (JSON)");
  app.add_option("--seed", seed, "Override train.seed");

  auto* ex = app.add_subcommand("extract-f0", "Track f0 for every WAV in a directory");
  std::string ex_in, ex_out;
  double fmin = 50.0, fmax = 800.0;
  ex->add_option("--in", ex_in)->required();
  ex->add_option("--out", ex_out)->required();
  ex->add_option("--fmin", fmin);
  ex->add_option("--fmax", fmax);

  auto* ss = app.add_subcommand("singer-stats", "Per-singer f0 statistics");
  std::string ss_manifest, ss_out, ss_config_out;
  ss->add_option("--manifest", ss_manifest)->required();
  ss->add_option("--out", ss_out)->required();
  ss->add_option("--config-out", ss_config_out,
                 "Write the config with corpus f0 statistics filled in");

  auto* fe = app.add_subcommand("features", "Content feature tools");
  auto* fe_ex = fe->add_subcommand("extract", "Extract or validate content features");
  fe->require_subcommand(1);
  std::string fe_provider = "pseudo", fe_in, fe_out;
  fe_ex->add_option("--provider", fe_provider)->check(CLI::IsMember({"file", "pseudo"}));
  fe_ex->add_option("--in", fe_in)->required();
  fe_ex->add_option("--out", fe_out)->required();

  auto* tr = app.add_subcommand("train", "Train from the config's manifest");
  std::string tr_resume;
  std::optional<std::int64_t> tr_steps;
  tr->add_option("--resume", tr_resume, "Checkpoint to resume from");
  tr->add_option("--steps", tr_steps, "Override train.steps");

  auto* cv = app.add_subcommand("convert", "Convert a clip to another singer");
  std::string cv_ckpt, cv_src, cv_from, cv_to, cv_out, cv_registry;
  bool cv_utt = false;
  cv->add_option("--checkpoint", cv_ckpt)->required();
  cv->add_option("--source", cv_src)->required();
  cv->add_option("--source-singer", cv_from)->required();
  cv->add_option("--target-singer", cv_to)->required();
  cv->add_option("--out", cv_out)->required();
  cv->add_option("--registry", cv_registry);
  cv->add_flag("--utterance-stats", cv_utt);

  auto* ev = app.add_subcommand("eval-report", "Plots and metrics for one clip");
  std::string ev_ckpt, ev_clip, ev_out;
  int ev_singer = 0;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--clip", ev_clip)->required();
  ev->add_option("--out-dir", ev_out)->required();
  ev->add_option("--singer", ev_singer);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
    if (seed) cfg.train.seed = *seed;

    if (*ex) {
      TrackerConfig t = cfg.tracker;
      if (ex->count("--fmin")) t.fmin = fmin;
      if (ex->count("--fmax")) t.fmax = fmax;
      const auto s = cmd_extract_f0(ex_in, ex_out, t);
      for (const auto& f : s.failed) err << "failed: " << f << '\n';
      out << s.processed << " processed, " << s.failed.size() << " failed\n";
      return s.failed.empty() ? 0 : 2;
    }
    if (*ss) {
      const auto r = cmd_singer_stats(cfg, ss_manifest, ss_out);
      for (const auto& p : r.singers)
        out << p.id << ' ' << p.name << " mean " << p.stats.mean << " std " << p.stats.std
            << " voiced " << p.stats.voiced_frames << '\n';
      if (!r.singers.empty())
        out << "global mean " << r.global.mean << " std " << r.global.std << '\n';
      if (!ss_config_out.empty()) {
        cfg.normalization = r.global;
        save_config(cfg, ss_config_out);
      }
      return 0;
    }
    if (*fe_ex) {
      const auto s = cmd_features_extract(cfg, provider_kind_from_string(fe_provider), fe_in,
                                          fe_out);
      for (const auto& f : s.failed) err << "failed: " << f << '\n';
      out << s.processed << " processed, " << s.failed.size() << " failed\n";
      return s.failed.empty() ? 0 : 2;
    }
    if (*tr) {
      if (tr_steps) cfg.train.steps = *tr_steps;
      std::optional<fs::path> resume;
      if (!tr_resume.empty()) resume = tr_resume;
      const auto s = cmd_train(cfg, resume, out);
      out << "trained to step " << s.steps_done << ", checkpoint " << s.checkpoint.string()
          << ", log " << s.loss_log.string() << '\n';
      return 0;
    }
    if (*cv) {
      if (!cv_registry.empty()) cfg.paths.registry = cv_registry;
      const auto c = cmd_convert(cfg, cv_ckpt, cv_src, cv_from, cv_to, cv_out, cv_utt);
      out << "wrote " << cv_out << ": " << c.audio.size() << " samples, " << c.frames
          << " frames, " << c.clamped << " f0 frames clamped\n";
      return 0;
    }
    if (*ev) {
      const auto m = cmd_eval_report(cfg, ev_ckpt, ev_clip, ev_singer, ev_out);
      out << "mel_l1 " << m.mel_l1 << " f0_pearson_voiced " << m.f0_pearson_voiced << '\n';
      return 0;
    }
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace svc
