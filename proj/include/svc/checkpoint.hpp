#pragma once

// Checkpoint container: the 8-byte magic "SVCCKPT1", a little-endian u64
// header length, a JSON header, then the float64 payload of every named
// blob. The header records step, config fingerprint, the full config and
// the blob table {name, shape, offset, count}.

#include <cstdint>
#include <filesystem>

#include "json.hpp"

#include "svc/config.hpp"
#include "svc/trainer.hpp"

namespace svc {

struct CheckpointHeader {
  std::int64_t step = 0;
  std::uint64_t fingerprint = 0;
  std::int64_t adam_g_steps = 0;
  std::int64_t adam_d_steps = 0;
  nlohmann::json config;
  nlohmann::json blobs;
};

void save_checkpoint(const Trainer& trainer, const std::filesystem::path& path);

// Restores parameters, optimizer moments and the step counter. Throws
// ConfigError on a fingerprint mismatch and DataError on a damaged file.
void load_checkpoint(Trainer& trainer, const std::filesystem::path& path);

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

// Fills corpus f0 statistics left unset in `cfg` from the checkpoint's own
// config, so a config written before training still matches.
RunConfig resolve_config(const RunConfig& cfg, const CheckpointHeader& header);

// Builds a model for `cfg` and loads its parameters (optimizer state is
// ignored). Throws ConfigError on a fingerprint mismatch.
Model load_model(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace svc
