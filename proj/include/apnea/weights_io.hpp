#pragma once

#include <filesystem>

#include "apnea/model.hpp"

namespace apnea::cli {

// Weight file: magic "APNW", u32 version=1, u32 entry count, then a manifest
// of (u32 name length, name bytes, u8 kind [0 parameter, 1 running stat],
// u32 ndim, u32 dims..., u64 payload byte offset), u64 payload size, payload
// of concatenated little-endian float32 arrays. Manifest order matches the
// model's parameter registration order, running statistics after.
void save_weights(const std::filesystem::path& path, const model::ResNetModel& net);

// Loads into an already-built model; any name/shape mismatch is an
// ArtifactError carrying the manifest diagnostic.
void load_weights(const std::filesystem::path& path, model::ResNetModel& net);

}  // namespace apnea::cli
