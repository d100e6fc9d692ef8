#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lglbci/network.hpp"

namespace lgl {

inline constexpr std::uint32_t kModelVersion = 1;

// "LGLM" | version u32 | payload length u64 | payload | CRC-32 of payload u32.
std::vector<std::uint8_t> encode_model(const ModelBundle& model);
// Throws MalformedHeader, VersionMismatch, DimensionMismatch, ChecksumMismatch.
ModelBundle decode_model(std::span<const std::uint8_t> bytes);

// Throws IoFailure plus the decode errors.
void save_model(const ModelBundle& model, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

// CRC-32 of the encoded model, a cheap fingerprint of every parameter.
std::uint32_t model_hash(const ModelBundle& model);

}  // namespace lgl
