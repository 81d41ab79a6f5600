#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rsflow/vectorfield.hpp"

namespace rsflow {

struct Checkpoint {
    VectorFieldParams<float> params;
    AdamState<float> adam;
    std::uint64_t step = 0;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// RSFL v1: "RSFL", u8 version, tagged ModelConfig, u32 tensor count, then per
// tensor u32 rows, u32 cols and f32 LE values in declaration order; the Adam
// step counter and first/second moments in the same order; the u64 training
// step; CRC-32 of every preceding byte.
inline constexpr std::uint8_t kCheckpointVersion = 1;

std::vector<char> encode_checkpoint(const Checkpoint& ckpt);

/// Verifies magic, version and checksum before parsing anything else.
Checkpoint decode_checkpoint(std::span<const char> bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace rsflow
