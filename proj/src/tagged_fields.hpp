#pragma once

// Field-tagged headers shared by the CBOK and RSFL formats: a sequence of
// (u8 tag, u8 type, value) records closed by tag 0. Type 1 is a u32, type 2
// an f64.

#include <cstdint>
#include <string>

#include "rsflow/binary_io.hpp"

namespace rsflow::tagged {

constexpr std::uint8_t kU32 = 1;
constexpr std::uint8_t kF64 = 2;

struct Value {
    std::uint8_t type;
    std::uint32_t u32;
    double f64;
    std::string context;

    std::uint32_t as_u32() const {
        if (type != kU32) throw FormatError(context + ": expected an integer field");
        return u32;
    }
    double as_f64() const {
        if (type != kF64) throw FormatError(context + ": expected a real field");
        return f64;
    }
};

inline void put_u32(ByteWriter& w, std::uint8_t tag, std::uint32_t v) {
    w.u8(tag);
    w.u8(kU32);
    w.u32(v);
}

inline void put_f64(ByteWriter& w, std::uint8_t tag, double v) {
    w.u8(tag);
    w.u8(kF64);
    w.f64(v);
}

inline void end(ByteWriter& w) { w.u8(0); }

template <typename F>
void read_fields(ByteReader& r, const std::string& context, F&& on_field) {
    for (;;) {
        const std::uint8_t tag = r.u8();
        if (tag == 0) return;
        Value v{r.u8(), 0, 0.0, context};
        if (v.type == kU32)
            v.u32 = r.u32();
        else if (v.type == kF64)
            v.f64 = r.f64();
        else
            throw FormatError(context + ": unknown field type " + std::to_string(v.type));
        on_field(tag, v);
    }
}

}  // namespace rsflow::tagged
