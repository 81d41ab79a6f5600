#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsflow/error.hpp"

namespace rsflow {

/// Little-endian byte sink used by every on-disk format.
class ByteWriter {
public:
    void bytes(std::string_view raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        put_le(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        put_le(bits);
    }

    const std::vector<char>& buffer() const { return buf_; }
    std::vector<char> take() { return std::move(buf_); }

private:
    template <typename U>
    void put_le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }

    std::vector<char> buf_;
};

/// Bounds-checked little-endian reader; truncation raises FormatError.
class ByteReader {
public:
    ByteReader(std::span<const char> data, std::string context)
        : data_(data), context_(std::move(context)) {}

    std::string_view bytes(std::size_t n) {
        need(n);
        std::string_view out(data_.data() + pos_, n);
        pos_ += n;
        return out;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(get_le<std::uint8_t>()); }
    std::uint16_t u16() { return get_le<std::uint16_t>(); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    float f32() {
        const auto bits = get_le<std::uint32_t>();
        float v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    double f64() {
        const auto bits = get_le<std::uint64_t>();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    void expect_end() const {
        if (pos_ != data_.size())
            throw FormatError(context_ + ": " + std::to_string(data_.size() - pos_) + " trailing bytes");
    }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw FormatError(context_ + ": unexpected end of data");
    }

    template <typename U>
    U get_le() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
        pos_ += sizeof(U);
        return v;
    }

    std::span<const char> data_;
    std::size_t pos_ = 0;
    std::string context_;
};

std::uint32_t crc32_of(std::span<const char> data);

std::vector<char> read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never observe a
/// half-written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> data);

std::string to_hex(std::span<const char> data);
std::vector<char> from_hex(std::string_view hex);

}  // namespace rsflow
