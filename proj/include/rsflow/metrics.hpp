#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsflow/latent.hpp"
#include "rsflow/tokens.hpp"
#include "rsflow/toyspeech.hpp"

namespace rsflow {

struct EditCounts {
    std::size_t distance = 0;
    std::size_t substitutions = 0;
    std::size_t insertions = 0;
    std::size_t deletions = 0;

    friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

/// Unit-cost Levenshtein alignment of hyp against ref. The traceback prefers
/// a diagonal step, then an insertion, then a deletion, so the S/I/D split is
/// deterministic.
template <typename T>
EditCounts edit_distance(std::span<const T> ref, std::span<const T> hyp) {
    const std::size_t n = ref.size();
    const std::size_t m = hyp.size();
    std::vector<std::size_t> d((n + 1) * (m + 1));
    auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
    for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
    for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j)
            at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1), at(i, j - 1) + 1,
                                 at(i - 1, j) + 1});

    EditCounts out;
    out.distance = at(n, m);
    std::size_t i = n, j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0) {
            const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            if (diag == at(i, j)) {
                if (ref[i - 1] != hyp[j - 1]) ++out.substitutions;
                --i;
                --j;
                continue;
            }
        }
        if (j > 0 && at(i, j - 1) + 1 == at(i, j)) {
            ++out.insertions;
            --j;
        } else {
            ++out.deletions;
            --i;
        }
    }
    return out;
}

template <typename T>
EditCounts edit_distance(const std::vector<T>& ref, const std::vector<T>& hyp) {
    return edit_distance(std::span<const T>(ref), std::span<const T>(hyp));
}

/// Removes ASCII punctuation, lowercases ASCII letters, collapses whitespace
/// runs to one space and trims. Non-ASCII bytes pass through untouched.
std::string normalize_text(std::string_view s);

/// UTF-8 code points of s; invalid bytes map to themselves.
std::vector<char32_t> code_points(std::string_view s);
std::vector<std::string> split_words(std::string_view s);

struct ErrorRateReport {
    double rate_pct = 0.0;
    std::size_t substitutions = 0;
    std::size_t insertions = 0;
    std::size_t deletions = 0;
    std::size_t ref_len = 0;
    std::size_t hyp_len = 0;

    std::size_t errors() const { return substitutions + insertions + deletions; }
};

/// Character error rate in percent after normalization.
ErrorRateReport cer(std::string_view ref, std::string_view hyp);
/// Word error rate in percent after normalization.
ErrorRateReport wer(std::string_view ref, std::string_view hyp);

/// Pools edit counts; the rate is total edits over total reference length.
ErrorRateReport pool(std::span<const ErrorRateReport> reports);

struct UtteranceResult {
    std::uint64_t seed = 0;
    std::size_t index = 0;
    std::string reference;
    std::string hypothesis;
    ErrorRateReport cer;
    ErrorRateReport wer;
};

struct SeedSummary {
    std::uint64_t seed = 0;
    ErrorRateReport cer;
    ErrorRateReport wer;
};

struct EvalReport {
    std::vector<UtteranceResult> rows;  // seed-major, then utterance order
    std::vector<SeedSummary> per_seed;
    ErrorRateReport cer;
    ErrorRateReport wer;
    std::vector<UtteranceResult> worst;  // highest CER first
};

/// Produces one latent per text for a given sampling seed, in order.
using Synthesizer = std::function<std::vector<LatentSequence>(const std::vector<Tokens>& texts, std::uint64_t seed)>;

/// Synthesizes every eval utterance once per seed, decodes with the oracle
/// decoder and scores the rendered text against the reference text.
EvalReport evaluate(const Synthesizer& synth, std::span<const ToyUtterance> eval_set, const Codebook& codebook,
                    std::span<const std::uint64_t> seeds, std::size_t worst_count = 5);

}  // namespace rsflow
