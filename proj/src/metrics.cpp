#include "rsflow/metrics.hpp"

#include <cctype>

namespace rsflow {

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::ispunct(c)) continue;
        if (c < 0x80 && std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
    return out;
}

std::vector<char32_t> code_points(std::string_view s) {
    std::vector<char32_t> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        int extra = 0;
        char32_t cp = c;
        if (c >= 0xf0 && c < 0xf8) {
            extra = 3;
            cp = c & 0x07;
        } else if (c >= 0xe0) {
            extra = 2;
            cp = c & 0x0f;
        } else if (c >= 0xc0) {
            extra = 1;
            cp = c & 0x1f;
        }
        // Stray continuation bytes (0x80-0xbf) and 0xf8+ stand alone.
        bool valid = c < 0x80 || extra > 0;
        for (int k = 1; valid && k <= extra; ++k) {
            if (i + static_cast<std::size_t>(k) >= s.size()) {
                valid = false;
                break;
            }
            const auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
            if ((cc & 0xc0) != 0x80) valid = false;
            cp = (cp << 6) | (cc & 0x3f);
        }
        if (!valid) {
            out.push_back(c);
            ++i;
        } else {
            out.push_back(cp);
            i += 1 + static_cast<std::size_t>(extra);
        }
    }
    return out;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

namespace {

ErrorRateReport make_report(const EditCounts& e, std::size_t ref_len, std::size_t hyp_len) {
    ErrorRateReport r;
    r.substitutions = e.substitutions;
    r.insertions = e.insertions;
    r.deletions = e.deletions;
    r.ref_len = ref_len;
    r.hyp_len = hyp_len;
    r.rate_pct = 100.0 * static_cast<double>(r.errors()) / static_cast<double>(ref_len);
    return r;
}

}  // namespace

ErrorRateReport cer(std::string_view ref, std::string_view hyp) {
    const auto r = code_points(normalize_text(ref));
    const auto h = code_points(normalize_text(hyp));
    if (r.empty()) throw UndefinedRateError("cer: reference is empty after normalization");
    return make_report(edit_distance(r, h), r.size(), h.size());
}

ErrorRateReport wer(std::string_view ref, std::string_view hyp) {
    const auto r = split_words(normalize_text(ref));
    const auto h = split_words(normalize_text(hyp));
    if (r.empty()) throw UndefinedRateError("wer: reference is empty after normalization");
    return make_report(edit_distance(r, h), r.size(), h.size());
}

ErrorRateReport pool(std::span<const ErrorRateReport> reports) {
    ErrorRateReport out;
    for (const auto& r : reports) {
        out.substitutions += r.substitutions;
        out.insertions += r.insertions;
        out.deletions += r.deletions;
        out.ref_len += r.ref_len;
        out.hyp_len += r.hyp_len;
    }
    out.rate_pct = out.ref_len ? 100.0 * static_cast<double>(out.errors()) / static_cast<double>(out.ref_len) : 0.0;
    return out;
}

EvalReport evaluate(const Synthesizer& synth, std::span<const ToyUtterance> eval_set, const Codebook& codebook,
                    std::span<const std::uint64_t> seeds, std::size_t worst_count) {
    std::vector<Tokens> texts;
    texts.reserve(eval_set.size());
    for (const auto& u : eval_set) texts.push_back(u.tokens);

    EvalReport report;
    std::vector<ErrorRateReport> all_cer, all_wer;
    for (const auto seed : seeds) {
        const auto latents = synth(texts, seed);
        if (latents.size() != eval_set.size())
            throw UsageError("evaluate: synthesizer returned " + std::to_string(latents.size()) + " latents for " +
                             std::to_string(eval_set.size()) + " texts");
        std::vector<ErrorRateReport> seed_cer, seed_wer;
        for (std::size_t i = 0; i < eval_set.size(); ++i) {
            UtteranceResult row;
            row.seed = seed;
            row.index = i;
            row.reference = eval_set[i].text;
            row.hypothesis = render_text(oracle_decode(latents[i], codebook));
            row.cer = cer(row.reference, row.hypothesis);
            row.wer = wer(row.reference, row.hypothesis);
            seed_cer.push_back(row.cer);
            seed_wer.push_back(row.wer);
            report.rows.push_back(std::move(row));
        }
        report.per_seed.push_back({seed, pool(seed_cer), pool(seed_wer)});
        all_cer.insert(all_cer.end(), seed_cer.begin(), seed_cer.end());
        all_wer.insert(all_wer.end(), seed_wer.begin(), seed_wer.end());
    }
    report.cer = pool(all_cer);
    report.wer = pool(all_wer);

    report.worst = report.rows;
    std::stable_sort(report.worst.begin(), report.worst.end(),
                     [](const UtteranceResult& a, const UtteranceResult& b) { return a.cer.rate_pct > b.cer.rate_pct; });
    if (report.worst.size() > worst_count) report.worst.resize(worst_count);
    return report;
}

}  // namespace rsflow
