#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "rsflow/latent.hpp"

namespace rsflow {

// LTNT v1: "LTNT", u8 version, u32 C, u32 T, f32 frame_rate, then C*T f32
// values frame-major. All little-endian.
inline constexpr std::uint8_t kLtntVersion = 1;

std::vector<char> encode_ltnt(const LatentSequence& latent);
LatentSequence decode_ltnt(std::span<const char> bytes);

void write_ltnt(const std::filesystem::path& path, const LatentSequence& latent);
LatentSequence read_ltnt(const std::filesystem::path& path);

}  // namespace rsflow
