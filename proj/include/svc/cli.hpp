#pragma once

// Batch commands behind the `svc` executable. Each returns normally on
// success and throws svc::Error subclasses otherwise; run_cli maps those to
// exit codes 1 (usage/config), 2 (data) and 3 (divergence).

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "svc/config.hpp"
#include "svc/pipeline.hpp"
#include "svc/singer.hpp"

namespace svc {

struct ExtractSummary {
  std::size_t processed = 0;
  std::vector<std::string> failed;  // "<file>: <reason>"
};

// One f0 cache (<stem>.f0 + sidecar) per WAV in in_dir, in name order.
ExtractSummary cmd_extract_f0(const std::filesystem::path& in_dir,
                              const std::filesystem::path& out_dir,
                              const TrackerConfig& tracker);

// Per-singer and corpus-wide f0 statistics from a manifest. Singer names
// come from an optional "singer_name" manifest field. Throws DataError
// naming the singer when one has fewer than two voiced frames.
struct StatsResult {
  std::vector<SingerProfile> singers;
  F0Stats global;
};
StatsResult cmd_singer_stats(const RunConfig& cfg,
                             const std::filesystem::path& manifest,
                             const std::filesystem::path& out);

// Writes <stem>.feat (+ sidecar) for each input. Pseudo reads WAVs; file
// reads existing feature containers and re-validates them.
ExtractSummary cmd_features_extract(const RunConfig& cfg, ProviderKind provider,
                                    const std::filesystem::path& in_dir,
                                    const std::filesystem::path& out_dir);

struct TrainSummary {
  std::int64_t steps_done = 0;
  std::filesystem::path checkpoint;
  std::filesystem::path loss_log;
};

// Trains from cfg.paths.manifest into cfg.paths.out_dir: writes
// run_config.json, losses.csv (one row per step) and a checkpoint every
// checkpoint_interval steps plus at the end (latest.ckpt).
TrainSummary cmd_train(RunConfig cfg,
                       const std::optional<std::filesystem::path>& resume,
                       std::ostream& log);

Conversion cmd_convert(const RunConfig& cfg,
                       const std::filesystem::path& checkpoint,
                       const std::filesystem::path& source_wav,
                       const std::string& source_singer,
                       const std::string& target_singer,
                       const std::filesystem::path& out_wav,
                       bool utterance_stats);

EvalMetrics cmd_eval_report(const RunConfig& cfg,
                            const std::filesystem::path& checkpoint,
                            const std::filesystem::path& clip, int singer_id,
                            const std::filesystem::path& out_dir);

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace svc
