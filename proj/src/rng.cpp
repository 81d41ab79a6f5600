#include "rsflow/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rsflow {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

SeededRng::SeededRng(std::uint64_t seed) : key_(seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) {
        word = mix64(sm);
        sm += kGolden;
    }
}

std::uint64_t SeededRng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t SeededRng::uniform_int(std::uint64_t lo, std::uint64_t hi) {
    if (hi <= lo) return lo;
    const std::uint64_t range = hi - lo;
    if (range == std::numeric_limits<std::uint64_t>::max()) return next_u64();
    const std::uint64_t span = range + 1;
    // Reject the incomplete top bucket so every value is equally likely.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t draw = next_u64();
    while (draw >= limit) draw = next_u64();
    return lo + draw % span;
}

double SeededRng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(angle);
    has_cached_normal_ = true;
    return radius * std::cos(angle);
}

bool SeededRng::bernoulli(double p) { return uniform() < p; }

SeededRng SeededRng::substream(std::uint64_t id) const {
    return SeededRng(mix64(key_ ^ mix64(id ^ 0x5bd1e9955bd1e995ULL)));
}

SeededRng SeededRng::substream(std::string_view name) const {
    // FNV-1a over the name bytes.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return substream(h);
}

}  // namespace rsflow
