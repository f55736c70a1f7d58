#pragma once

#include <filesystem>

#include "ftscope/model.hpp"

namespace ftscope {

inline constexpr int kCheckpointFormatVersion = 1;

/// Writes `dir/manifest.json` and `dir/params.bin` (little-endian float64 blobs
/// concatenated in manifest order). Creates `dir` if needed.
void save_checkpoint(const ModelCheckpoint& model, const std::filesystem::path& dir);

/// Reads a checkpoint written by save_checkpoint. Throws IoError when files are
/// unreadable and FormatError on version, parameter-set or length mismatches.
ModelCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace ftscope
