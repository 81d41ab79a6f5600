#include "rsflow/checkpoint.hpp"

#include "rsflow/binary_io.hpp"
#include "tagged_fields.hpp"

namespace rsflow {

namespace {

enum ConfigTag : std::uint8_t {
    kChannels = 1,
    kVocab = 2,
    kEmbed = 3,
    kHidden = 4,
    kLayers = 5,
    kWindow = 6,
    kTimeDim = 7,
    kUncondProb = 8,
};

void put_tensors(ByteWriter& w, const VectorFieldParams<float>& p) {
    p.for_each_tensor([&](const std::string&, const Matrix<float>& m) {
        w.u32(static_cast<std::uint32_t>(m.rows()));
        w.u32(static_cast<std::uint32_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) w.f32(m.data()[i]);
    });
}

void get_tensors(ByteReader& r, VectorFieldParams<float>& p) {
    p.for_each_tensor([&](const std::string& name, Matrix<float>& m) {
        const auto rows = r.u32();
        const auto cols = r.u32();
        if (rows != m.rows() || cols != m.cols())
            throw FormatError("RSFL: tensor " + name + " is " + std::to_string(rows) + "x" + std::to_string(cols) +
                              ", config implies " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f32();
    });
}

}  // namespace

std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
    const ModelConfig& c = ckpt.params.config;
    ByteWriter w;
    w.bytes("RSFL");
    w.u8(kCheckpointVersion);
    tagged::put_u32(w, kChannels, static_cast<std::uint32_t>(c.channels));
    tagged::put_u32(w, kVocab, static_cast<std::uint32_t>(c.vocab_size));
    tagged::put_u32(w, kEmbed, static_cast<std::uint32_t>(c.embed_dim));
    tagged::put_u32(w, kHidden, static_cast<std::uint32_t>(c.hidden_dim));
    tagged::put_u32(w, kLayers, static_cast<std::uint32_t>(c.num_layers));
    tagged::put_u32(w, kWindow, static_cast<std::uint32_t>(c.context_window));
    tagged::put_u32(w, kTimeDim, static_cast<std::uint32_t>(c.time_embed_dim));
    tagged::put_f64(w, kUncondProb, c.uncond_prob);
    tagged::end(w);

    std::uint32_t tensors = 0;
    ckpt.params.for_each_tensor([&](const std::string&, const Matrix<float>&) { ++tensors; });
    w.u32(tensors);
    put_tensors(w, ckpt.params);
    w.u64(ckpt.adam.step);
    put_tensors(w, ckpt.adam.m);
    put_tensors(w, ckpt.adam.v);
    w.u64(ckpt.step);
    w.u32(crc32_of(w.buffer()));
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const char> bytes) {
    if (bytes.size() < 9) throw FormatError("RSFL: file too short");
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4), "RSFL");
    if (std::string_view(bytes.data(), 4) != "RSFL") throw FormatError("RSFL: bad magic");
    if (static_cast<std::uint8_t>(bytes[4]) != kCheckpointVersion)
        throw FormatError("RSFL: unsupported version " + std::to_string(static_cast<std::uint8_t>(bytes[4])));
    if (tail.u32() != crc32_of(body)) throw FormatError("RSFL: checksum mismatch, checkpoint is corrupt");

    ByteReader r(body, "RSFL");
    r.bytes(5);
    ModelConfig c;
    tagged::read_fields(r, "RSFL", [&](std::uint8_t tag, const tagged::Value& v) {
        switch (tag) {
            case kChannels: c.channels = static_cast<int>(v.as_u32()); break;
            case kVocab: c.vocab_size = static_cast<int>(v.as_u32()); break;
            case kEmbed: c.embed_dim = static_cast<int>(v.as_u32()); break;
            case kHidden: c.hidden_dim = static_cast<int>(v.as_u32()); break;
            case kLayers: c.num_layers = static_cast<int>(v.as_u32()); break;
            case kWindow: c.context_window = static_cast<int>(v.as_u32()); break;
            case kTimeDim: c.time_embed_dim = static_cast<int>(v.as_u32()); break;
            case kUncondProb: c.uncond_prob = v.as_f64(); break;
            default: throw FormatError("RSFL: unknown config tag " + std::to_string(tag));
        }
    });
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("RSFL: invalid model config: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.params = VectorFieldParams<float>::zeros(c);
    ckpt.adam = AdamState<float>::for_params(ckpt.params);
    const auto tensors = r.u32();
    std::uint32_t expected = 0;
    ckpt.params.for_each_tensor([&](const std::string&, const Matrix<float>&) { ++expected; });
    if (tensors != expected)
        throw FormatError("RSFL: " + std::to_string(tensors) + " tensors, config implies " + std::to_string(expected));
    get_tensors(r, ckpt.params);
    ckpt.adam.step = r.u64();
    get_tensors(r, ckpt.adam.m);
    get_tensors(r, ckpt.adam.v);
    ckpt.step = r.u64();
    r.expect_end();
    return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace rsflow
