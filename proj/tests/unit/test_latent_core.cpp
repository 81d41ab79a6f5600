#include <doctest.h>

#include <cmath>
#include <random>

#include "rsflow/binary_io.hpp"
#include "rsflow/latent.hpp"
#include "rsflow/ltnt.hpp"
#include "rsflow/rng.hpp"
#include "support.hpp"

using namespace rsflow;
using testsupport::row_latent;
using testsupport::row_values;

namespace {

// Reference xoshiro256** (Blackman & Vigna), seeded with the first four
// splitmix64 outputs for seed 0 as published alongside the generator.
struct ReferenceXoshiro {
    std::uint64_t s[4] = {0xe220a8397b1dcdafULL, 0x6e789e6aa1b965f4ULL, 0x06c45d188009454fULL, 0xf88bb8a8724c81ecULL};
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t next() {
        const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }
};

}  // namespace

TEST_SUITE("latent-core") {

TEST_CASE("seed 0 matches the reference generator") {
    SeededRng rng(0);
    ReferenceXoshiro ref;
    for (int i = 0; i < 1000; ++i) REQUIRE(rng.next_u64() == ref.next());
}

TEST_CASE("seed 0 reference outputs") {
    SeededRng rng(0);
    CHECK(rng.next_u64() == 0x99ec5f36cb75f2b4ULL);
    CHECK(rng.next_u64() == 0xbf6e1f784956452aULL);
    CHECK(rng.next_u64() == 0x1a5f849d4933e6e0ULL);
    CHECK(rng.next_u64() == 0x6aa594f1262d2d2cULL);
    CHECK(SeededRng(0).substream(1).next_u64() == 0xe7b788ee9ae6b35fULL);
    CHECK(mix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("identical seeds give identical streams") {
    SeededRng a(12345), b(12345);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
        CHECK(a.normal() == b.normal());
    }
}

TEST_CASE("substreams depend only on key and id") {
    SeededRng parent(7);
    const auto before = parent.substream("eval").next_u64();
    for (int i = 0; i < 10; ++i) parent.next_u64();
    CHECK(parent.substream("eval").next_u64() == before);
    CHECK(parent.substream("eval").next_u64() != parent.substream("train").next_u64());
    CHECK(parent.substream(std::uint64_t{1}).next_u64() != parent.substream(std::uint64_t{2}).next_u64());
}

TEST_CASE("uniform_int stays in range and hits both ends") {
    SeededRng rng(3);
    bool lo = false, hi = false;
    for (int i = 0; i < 5000; ++i) {
        const auto v = rng.uniform_int(2, 6);
        REQUIRE(v >= 2);
        REQUIRE(v <= 6);
        lo = lo || v == 2;
        hi = hi || v == 6;
    }
    CHECK(lo);
    CHECK(hi);
    CHECK(rng.uniform_int(4, 4) == 4);
}

TEST_CASE("uniform lies in [0, 1)") {
    SeededRng rng(9);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("frames_for_seconds") {
    CHECK(frames_for_seconds(0.1, 20.0) == 2);
    CHECK(frames_for_seconds(5.0, 20.0) == 100);
    CHECK(frames_for_seconds(0.0, 20.0) == 0);
    CHECK(frames_for_seconds(0.001, 20.0) == 1);
    std::size_t prev = 0;
    for (int i = 0; i <= 1000; ++i) {
        const auto n = frames_for_seconds(i * 0.01, 20.0);
        REQUIRE(n >= prev);
        prev = n;
    }
}

TEST_CASE("mse examples") {
    CHECK(mse(LatentSequence::zeros(1, 4, 20), LatentSequence::zeros(1, 4, 20)) == 0.0);
    CHECK(mse(row_latent({1, 2}), row_latent({0, 0})) == 2.5);
    CHECK_THROWS_AS(mse(row_latent({1, 2}), row_latent({1, 2, 3})), ShapeError);
}

TEST_CASE("mse matches a per-element loop") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = testsupport::random_latent(4, 32, gen);
        const auto b = testsupport::random_latent(4, 32, gen);
        double sum = 0.0;
        for (Eigen::Index c = 0; c < 4; ++c)
            for (Eigen::Index j = 0; j < 32; ++j) {
                const double d = static_cast<double>(a.values()(c, j)) - static_cast<double>(b.values()(c, j));
                sum += d * d;
            }
        CHECK(std::abs(mse(a, b) - sum / 128.0) <= 1e-12);
        CHECK(mse(a, b) == mse(b, a));
        CHECK(mse(a, a) == 0.0);
    }
}

TEST_CASE("overwrite_span examples") {
    const auto dst = row_latent({0, 1, 2, 3});
    const auto src = row_latent({9, 9, 9, 9});
    CHECK(row_values(overwrite_span(dst, 1, src, 0, 2)) == std::vector<float>{0, 9, 9, 3});
    CHECK(row_values(overwrite_span(dst, 2, src, 0, 2)) == std::vector<float>{0, 1, 9, 9});
    CHECK_THROWS_AS(overwrite_span(dst, 3, src, 0, 2), RangeError);
    CHECK_THROWS_AS(overwrite_span(dst, 0, src, 3, 2), RangeError);
    CHECK_THROWS_AS(overwrite_span(dst, 0, LatentSequence::zeros(2, 4, 20), 0, 1), ShapeError);
    // dst itself is untouched.
    CHECK(row_values(dst) == std::vector<float>{0, 1, 2, 3});
}

TEST_CASE("overwrite_span leaves frames outside the span bitwise unchanged") {
    std::mt19937_64 gen(5);
    const auto dst = testsupport::random_latent(3, 20, gen);
    const auto src = testsupport::random_latent(3, 20, gen);
    const auto out = overwrite_span(dst, 6, src, 1, 5);
    CHECK(out.channels() == 3);
    CHECK(out.frames() == 20);
    for (Eigen::Index j = 0; j < 20; ++j) {
        if (j >= 6 && j < 11)
            CHECK(out.frame(j) == src.frame(j - 5));
        else
            CHECK(out.frame(j) == dst.frame(j));
    }
}

TEST_CASE("latent shape validation") {
    CHECK_THROWS_AS(LatentSequence(0, 4, 20.0), ShapeError);
    CHECK_THROWS_AS(LatentSequence(1, 0, 20.0), ShapeError);
    CHECK_THROWS_AS(LatentSequence(1, 4, 0.0), ShapeError);
    const LatentSequence x(3, 5, 20.0);
    CHECK(x.values().size() == 15);
}

TEST_CASE("frame-major storage") {
    rsflow::Matrix<float> m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    const LatentSequence x(m, 20.0);
    const std::vector<float> flat(x.data(), x.data() + 6);
    CHECK(flat == std::vector<float>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("crc32 check value") {
    const std::string s = "123456789";
    CHECK(crc32_of(std::span<const char>(s.data(), s.size())) == 0xCBF43926u);
}

TEST_CASE("hex round trip") {
    const std::vector<char> bytes{0, 1, char(0x7f), char(0x80), char(0xff)};
    CHECK(to_hex(bytes) == "00017f80ff");
    CHECK(from_hex("00017f80ff") == bytes);
    CHECK_THROWS_AS(from_hex("0g"), FormatError);
    CHECK_THROWS_AS(from_hex("abc"), FormatError);
}

TEST_CASE("LTNT layout") {
    rsflow::Matrix<float> m(2, 2);
    m << 1.0f, 2.0f, 3.0f, 4.0f;
    const auto bytes = encode_ltnt(LatentSequence(m, 20.0));
    REQUIRE(bytes.size() == 4 + 1 + 4 + 4 + 4 + 16);
    CHECK(std::string(bytes.data(), 4) == "LTNT");
    CHECK(bytes[4] == 1);
    ByteReader r(bytes, "test");
    r.bytes(5);
    CHECK(r.u32() == 2);
    CHECK(r.u32() == 2);
    CHECK(r.f32() == 20.0f);
    // Frame-major: frame 0 is (1, 3).
    CHECK(r.f32() == 1.0f);
    CHECK(r.f32() == 3.0f);
    CHECK(r.f32() == 2.0f);
    CHECK(r.f32() == 4.0f);
}

TEST_CASE("LTNT round trip is byte identical") {
    std::mt19937_64 gen(2);
    testsupport::ScratchDir dir("ltnt");
    const auto x = testsupport::random_latent(8, 48, gen);
    write_ltnt(dir / "a.ltnt", x);
    const auto y = read_ltnt(dir / "a.ltnt");
    CHECK(y == x);
    write_ltnt(dir / "b.ltnt", y);
    CHECK(testsupport::slurp(dir / "a.ltnt") == testsupport::slurp(dir / "b.ltnt"));
}

TEST_CASE("LTNT rejects malformed input") {
    auto bytes = encode_ltnt(row_latent({1, 2, 3}));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_ltnt(bad_magic), FormatError);
    auto bad_version = bytes;
    bad_version[4] = 2;
    CHECK_THROWS_AS(decode_ltnt(bad_version), FormatError);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_ltnt(truncated), FormatError);
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_ltnt(trailing), FormatError);
    auto nan = encode_ltnt(row_latent({1, std::nanf(""), 3}));
    CHECK_THROWS_AS(decode_ltnt(nan), FormatError);
    CHECK_THROWS_AS(read_ltnt("/nonexistent/file.ltnt"), IoError);
}

}  // TEST_SUITE
