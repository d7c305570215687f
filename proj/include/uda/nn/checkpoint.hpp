#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "uda/nn/params.hpp"

namespace uda::nn {

inline constexpr const char* kCheckpointFormatVersion = "1";

/// Everything in a checkpoint directory except the tensor payload.
struct CheckpointHeader {
  std::string kind;
  nlohmann::json config;
  long step_count = 0;
};

/// Writes <dir>/manifest.json (format version, kind, config, step_count and
/// a name -> {shape, dtype, offset} index) and <dir>/params.bin holding the
/// tensors as little-endian float32 in index order.
void save_checkpoint(const std::filesystem::path& dir, const CheckpointHeader& header,
                     const ParamSet<float>& params);

CheckpointHeader read_checkpoint_header(const std::filesystem::path& dir);

/// Fills `params` (names and shapes must match the index exactly).
/// Rejects unknown format versions.
CheckpointHeader load_checkpoint(const std::filesystem::path& dir, ParamSet<float>& params);

}  // namespace uda::nn
