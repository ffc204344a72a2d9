#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "json.hpp"
#include "mtgrid/common/error.hpp"
#include "mtgrid/model/config.hpp"
#include "mtgrid/training/optimizer.hpp"

namespace mtgrid {

inline constexpr int kCheckpointFormatVersion = 1;

// A checkpoint is `<prefix>.manifest.json` plus `<prefix>.tensors.bin`. The
// blob holds little-endian float32 tensors back to back in manifest order;
// the manifest lists each tensor's name, shape and byte offset. Optimizer
// moments, when present, follow the model tensors as "adam.m/<name>" and
// "adam.v/<name>".
struct CheckpointFormatError : IoError {
  using IoError::IoError;
};
struct CheckpointVersionError : CheckpointFormatError {
  using CheckpointFormatError::CheckpointFormatError;
};
struct CheckpointTruncatedError : CheckpointFormatError {
  using CheckpointFormatError::CheckpointFormatError;
};
struct CheckpointShapeError : CheckpointFormatError {
  using CheckpointFormatError::CheckpointFormatError;
};
// Offset table does not describe a contiguous, ascending layout of the blob.
struct ManifestInconsistentError : CheckpointFormatError {
  using CheckpointFormatError::CheckpointFormatError;
};

struct Checkpoint {
  ModelConfig model_config;
  std::int64_t step = 0;
  Parameters params;
  std::optional<AdamState> training_state;
  nlohmann::json metadata = nlohmann::json::object();
};

std::filesystem::path manifest_path(const std::filesystem::path& prefix);
std::filesystem::path blob_path(const std::filesystem::path& prefix);
// Accepts a prefix, a manifest path or a blob path and returns the prefix.
std::filesystem::path checkpoint_prefix(const std::filesystem::path& path);

// Both files are written atomically, blob first.
void save_checkpoint(const std::filesystem::path& prefix, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Manifest only, without reading tensors.
nlohmann::json read_manifest(const std::filesystem::path& path);

}  // namespace mtgrid
