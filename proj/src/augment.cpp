#include "rsflow/augment.hpp"

#include <sstream>

namespace rsflow {

void AugmentConfig::validate() const {
    auto check_interval = [](const Interval& iv, const char* name, double lo, double hi) {
        if (!(iv.lo <= iv.hi) || iv.lo < lo || iv.hi > hi)
            throw ConfigError(std::string("augment.") + name + ": invalid interval [" + std::to_string(iv.lo) + ", " +
                              std::to_string(iv.hi) + "]");
    };
    if (!(p_repeat > 0.0 && p_repeat < 1.0))
        throw ConfigError("augment.p_repeat: must lie strictly between 0 and 1");
    check_interval(repeat_budget, "repeat_budget", 0.0, 1.0);
    check_interval(skip_budget, "skip_budget", 0.0, 1.0);
    check_interval(span_seconds, "span_seconds", 0.0, 1e9);
    if (!(frame_rate > 0.0)) throw ConfigError("augment.frame_rate: must be positive");
    if (frames_for_seconds(span_seconds.lo, frame_rate) < 1)
        throw ConfigError("augment.span_seconds: lower bound maps to zero frames");
}

AugmentMode sample_mode(SeededRng& rng, const AugmentConfig& cfg) {
    return rng.uniform() < cfg.p_repeat ? AugmentMode::Repeat : AugmentMode::Skip;
}

double sample_budget(AugmentMode mode, SeededRng& rng, const AugmentConfig& cfg) {
    const Interval& iv = mode == AugmentMode::Repeat ? cfg.repeat_budget : cfg.skip_budget;
    return rng.uniform(iv.lo, iv.hi);
}

Eigen::Index sample_span_length(Eigen::Index frames, SeededRng& rng, const AugmentConfig& cfg) {
    if (frames < 2) throw DegenerateInputError("sample_span_length: need T >= 2, got " + std::to_string(frames));
    const auto hi = std::min<Eigen::Index>(
        static_cast<Eigen::Index>(frames_for_seconds(cfg.span_seconds.hi, cfg.frame_rate)), frames - 1);
    auto lo = std::max<Eigen::Index>(static_cast<Eigen::Index>(frames_for_seconds(cfg.span_seconds.lo, cfg.frame_rate)), 1);
    lo = std::min(lo, std::max<Eigen::Index>(hi, 1));
    return static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(lo), static_cast<std::uint64_t>(std::max(lo, hi))));
}

double coverage_of(const std::vector<AugmentEdit>& edits, Eigen::Index frames) {
    std::vector<char> touched(static_cast<std::size_t>(frames), 0);
    for (const auto& e : edits) {
        Eigen::Index from, len;
        if (const auto* rep = std::get_if<RepeatEdit>(&e)) {
            from = rep->target;
            len = rep->length;
        } else {
            from = std::get<SkipEdit>(e).start;
            len = std::get<SkipEdit>(e).length;
        }
        for (Eigen::Index j = from; j < from + len && j < frames; ++j) touched[static_cast<std::size_t>(j)] = 1;
    }
    const auto n = std::count(touched.begin(), touched.end(), 1);
    return static_cast<double>(n) / static_cast<double>(frames);
}

std::string describe(const AugmentEdit& edit) {
    std::ostringstream os;
    if (const auto* rep = std::get_if<RepeatEdit>(&edit))
        os << "repeat source=" << rep->source << " target=" << rep->target << " length=" << rep->length;
    else
        os << "skip start=" << std::get<SkipEdit>(edit).start << " length=" << std::get<SkipEdit>(edit).length;
    return os.str();
}

}  // namespace rsflow
