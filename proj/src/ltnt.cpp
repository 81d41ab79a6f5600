#include "rsflow/ltnt.hpp"

#include "rsflow/binary_io.hpp"

namespace rsflow {

std::vector<char> encode_ltnt(const LatentSequence& latent) {
    ByteWriter w;
    w.bytes("LTNT");
    w.u8(kLtntVersion);
    w.u32(static_cast<std::uint32_t>(latent.channels()));
    w.u32(static_cast<std::uint32_t>(latent.frames()));
    w.f32(static_cast<float>(latent.frame_rate()));
    const auto n = latent.values().size();
    for (Eigen::Index i = 0; i < n; ++i) w.f32(latent.data()[i]);
    return w.take();
}

LatentSequence decode_ltnt(std::span<const char> bytes) {
    ByteReader r(bytes, "LTNT");
    if (r.bytes(4) != "LTNT") throw FormatError("LTNT: bad magic");
    if (const auto v = r.u8(); v != kLtntVersion)
        throw FormatError("LTNT: unsupported version " + std::to_string(v));
    const auto channels = r.u32();
    const auto frames = r.u32();
    const float frame_rate = r.f32();
    if (channels == 0 || frames == 0) throw FormatError("LTNT: empty shape");
    if (!(frame_rate > 0.0f) || !std::isfinite(frame_rate)) throw FormatError("LTNT: invalid frame rate");
    const std::uint64_t count = std::uint64_t{channels} * frames;
    if (r.remaining() != count * 4)
        throw FormatError("LTNT: payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(count * 4));
    LatentSequence out(channels, frames, frame_rate);
    for (std::uint64_t i = 0; i < count; ++i) {
        const float v = r.f32();
        if (!std::isfinite(v)) throw FormatError("LTNT: non-finite value at index " + std::to_string(i));
        out.data()[i] = v;
    }
    return out;
}

void write_ltnt(const std::filesystem::path& path, const LatentSequence& latent) {
    write_file_atomic(path, encode_ltnt(latent));
}

LatentSequence read_ltnt(const std::filesystem::path& path) { return decode_ltnt(read_file(path)); }

}  // namespace rsflow
