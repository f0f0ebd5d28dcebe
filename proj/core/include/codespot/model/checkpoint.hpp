#pragma once

#include <filesystem>

#include "codespot/model/model.hpp"

namespace codespot::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian):
//   "CSPTCKPT" | u32 version | u64 vocab, ctx, d_model, heads, layers, seed
//   | u64 registry digest | u64 total scalars | f64[total] in registry order
void save_checkpoint(const ModelState& model, const std::filesystem::path& path);

// Digest error when the stored digest disagrees with the registry rebuilt from
// the stored config.
ModelState load_checkpoint(const std::filesystem::path& path);

// As above, and additionally requires the checkpoint to match `expected`.
ModelState load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace codespot::model
