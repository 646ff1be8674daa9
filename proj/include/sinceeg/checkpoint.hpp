#pragma once

#include "sinceeg/model.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>

namespace sinceeg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: "SNCK", u32 version, u32 header length, JSON header, then every
// tensor listed in header["tensors"] as little-endian f64 in that order
// (parameter values, then Adam first/second moments, then batch-norm
// running statistics).
void write_checkpoint(const std::filesystem::path& path, const Model& model, std::uint64_t seed,
                      const nlohmann::json& extra = nlohmann::json::object());

struct Checkpoint {
  Model model;
  std::uint64_t seed = 0;
  nlohmann::json header;
};

// Throws FormatError on malformed files.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace sinceeg
