#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rsflow/latent.hpp"
#include "rsflow/rng.hpp"

namespace rsflow {

enum class AugmentMode { Repeat, Skip };

inline const char* to_string(AugmentMode m) { return m == AugmentMode::Repeat ? "repeat" : "skip"; }

struct Interval {
    double lo;
    double hi;
};

struct AugmentConfig {
    double p_repeat = 0.5;
    Interval repeat_budget{0.2, 0.4};
    Interval skip_budget{0.4, 0.8};
    Interval span_seconds{0.1, 5.0};
    double frame_rate = 20.0;

    /// Throws ConfigError when an interval is empty or a probability is out of range.
    void validate() const;
};

/// Frames [target, target + length) were overwritten by [source, source + length).
struct RepeatEdit {
    Eigen::Index source;
    Eigen::Index target;
    Eigen::Index length;
    friend bool operator==(const RepeatEdit&, const RepeatEdit&) = default;
};

/// Frames [start, start + length) were removed and the tail padded with silence.
struct SkipEdit {
    Eigen::Index start;
    Eigen::Index length;
    friend bool operator==(const SkipEdit&, const SkipEdit&) = default;
};

using AugmentEdit = std::variant<RepeatEdit, SkipEdit>;

template <typename Scalar>
struct AugmentOutcome {
    Latent<Scalar> latent;
    AugmentMode mode;
    std::vector<AugmentEdit> edits;
    double realized_coverage = 0.0;
    double budget = 0.0;
    /// Coverage measured just before the last edit was applied.
    double coverage_before_last = 0.0;
};

/// Test and CLI hooks that pin a draw instead of sampling it.
struct AugmentOverrides {
    std::optional<AugmentMode> mode;
    std::optional<double> budget;
};

AugmentMode sample_mode(SeededRng& rng, const AugmentConfig& cfg);
double sample_budget(AugmentMode mode, SeededRng& rng, const AugmentConfig& cfg);
Eigen::Index sample_span_length(Eigen::Index frames, SeededRng& rng, const AugmentConfig& cfg);

/// Fraction of the T frames touched by the edits' target regions (union).
double coverage_of(const std::vector<AugmentEdit>& edits, Eigen::Index frames);

/// Frames [k, k + len) take x's frames [s, s + len) as they were before the
/// edit, so overlapping source and target behave as a simultaneous copy.
template <typename Scalar>
Latent<Scalar> repeat_overwrite(const Latent<Scalar>& x, Eigen::Index s, Eigen::Index len, Eigen::Index k) {
    if (s == k) throw InvalidEditError("repeat_overwrite: source and target start coincide at " + std::to_string(s));
    return overwrite_span(x, k, x, s, len);
}

/// Removes frames [s1, s1 + len), shifts the suffix forward and pads the last
/// len frames with the head of the silence latent.
template <typename Scalar>
Latent<Scalar> skip_shift(const Latent<Scalar>& x, Eigen::Index s1, Eigen::Index len, const Latent<Scalar>& silence) {
    const Eigen::Index frames = x.frames();
    if (silence.channels() != x.channels())
        throw ShapeError("skip_shift: silence has " + std::to_string(silence.channels()) + " channels, latent has " +
                         std::to_string(x.channels()));
    if (len < 1 || s1 < 0 || s1 + len > frames)
        throw RangeError("skip_shift: span [" + std::to_string(s1) + ", +" + std::to_string(len) +
                         ") out of range for T=" + std::to_string(frames));
    if (silence.frames() < len)
        throw RangeError("skip_shift: silence latent has " + std::to_string(silence.frames()) + " frames, need " +
                         std::to_string(len));
    Latent<Scalar> out = x;
    const Eigen::Index shifted = frames - len - s1;
    if (shifted > 0) out.values().middleCols(s1, shifted) = x.values().middleCols(s1 + len, shifted);
    out.values().rightCols(len) = silence.values().leftCols(len);
    return out;
}

template <typename Scalar>
Latent<Scalar> apply_edit(const Latent<Scalar>& x, const AugmentEdit& edit, const Latent<Scalar>& silence) {
    if (const auto* rep = std::get_if<RepeatEdit>(&edit)) return repeat_overwrite(x, rep->source, rep->length, rep->target);
    const auto& skip = std::get<SkipEdit>(edit);
    return skip_shift(x, skip.start, skip.length, silence);
}

/// Builds one length-preserving failure-mode negative.
///
/// Edits of the sampled mode are drawn and applied to the current sequence
/// while the union of edited frames covers less than budget * T. The edit
/// that crosses the budget is kept, so at least one edit is always applied.
template <typename Scalar>
AugmentOutcome<Scalar> augment(const Latent<Scalar>& x, const Latent<Scalar>& silence, SeededRng& rng,
                               const AugmentConfig& cfg, const AugmentOverrides& overrides = {}) {
    const Eigen::Index frames = x.frames();
    if (frames < 2) throw DegenerateInputError("augment: need at least 2 frames, got " + std::to_string(frames));

    AugmentOutcome<Scalar> out{x, overrides.mode ? *overrides.mode : sample_mode(rng, cfg), {}, 0.0, 0.0, 0.0};
    out.budget = overrides.budget ? *overrides.budget : sample_budget(out.mode, rng, cfg);

    std::vector<char> touched(static_cast<std::size_t>(frames), 0);
    Eigen::Index covered = 0;
    auto mark = [&](Eigen::Index from, Eigen::Index len) {
        for (Eigen::Index j = from; j < from + len; ++j) {
            if (!touched[static_cast<std::size_t>(j)]) {
                touched[static_cast<std::size_t>(j)] = 1;
                ++covered;
            }
        }
    };

    const double target = out.budget * static_cast<double>(frames);
    // Bounded so a budget of 1.0 cannot spin on the last uncovered frame.
    const std::size_t max_edits = static_cast<std::size_t>(frames) * 16;
    do {
        out.coverage_before_last = static_cast<double>(covered) / static_cast<double>(frames);
        const Eigen::Index len = sample_span_length(frames, rng, cfg);
        const auto positions = static_cast<std::uint64_t>(frames - len);  // starts 0..T-len
        if (out.mode == AugmentMode::Repeat) {
            const auto s = static_cast<Eigen::Index>(rng.uniform_int(0, positions));
            auto k = static_cast<Eigen::Index>(rng.uniform_int(0, positions - 1));
            if (k >= s) ++k;
            const RepeatEdit edit{s, k, len};
            out.latent = repeat_overwrite(out.latent, s, len, k);
            out.edits.emplace_back(edit);
            mark(k, len);
        } else {
            const auto s1 = static_cast<Eigen::Index>(rng.uniform_int(0, positions));
            const SkipEdit edit{s1, len};
            out.latent = skip_shift(out.latent, s1, len, silence);
            out.edits.emplace_back(edit);
            mark(s1, len);
        }
    } while (static_cast<double>(covered) < target && out.edits.size() < max_edits);

    out.realized_coverage = static_cast<double>(covered) / static_cast<double>(frames);
    return out;
}

/// output[i] = batch[(i + 1) mod B].
template <typename T>
std::vector<T> roll_batch(const std::vector<T>& batch) {
    if (batch.size() < 2)
        throw BatchTooSmallError("roll_batch: need at least 2 items, got " + std::to_string(batch.size()));
    std::vector<T> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(batch[(i + 1) % batch.size()]);
    return out;
}

std::string describe(const AugmentEdit& edit);

}  // namespace rsflow
