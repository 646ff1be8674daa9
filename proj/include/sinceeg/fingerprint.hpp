#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace sinceeg {

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

// Hash of the canonical (sorted-key, compact) JSON dump.
std::string fingerprint(const nlohmann::json& config);

std::string file_fingerprint(const std::filesystem::path& path);

// SplitMix64 step; used to derive independent seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sinceeg
