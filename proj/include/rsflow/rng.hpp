#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace rsflow {

/// Deterministic xoshiro256** generator seeded through splitmix64.
///
/// Every generator carries a 64-bit key it was derived from. substream(id)
/// derives a child from (key, id) alone, so a child stream does not depend on
/// how many values the parent has already produced. Parallel work takes one
/// substream per unit of work; a single instance is never shared.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi);

    /// Uniform integer on the closed range [lo, hi].
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal();

    bool bernoulli(double p);

    SeededRng substream(std::uint64_t id) const;
    SeededRng substream(std::string_view name) const;

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::array<std::uint64_t, 4> s_{};
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// splitmix64 finalizer, exposed for stable hashing of ids and content.
std::uint64_t mix64(std::uint64_t x);

}  // namespace rsflow
