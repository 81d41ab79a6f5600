#include <doctest.h>

#include <random>

#include "rsflow/metrics.hpp"
#include "support.hpp"

using namespace rsflow;

namespace {

std::vector<char> chars(const std::string& s) { return {s.begin(), s.end()}; }

std::string random_string(std::mt19937_64& gen, int alphabet, int max_len) {
    std::uniform_int_distribution<int> len(0, max_len);
    std::uniform_int_distribution<int> sym(0, alphabet - 1);
    std::string s(static_cast<std::size_t>(len(gen)), 'a');
    for (auto& c : s) c = static_cast<char>('a' + sym(gen));
    return s;
}

Codebook small_codebook() { return make_codebook(SeededRng(0), 6, 4, 2, 0.5); }

std::vector<ToyUtterance> small_eval_set(const Codebook& cb, int n) {
    std::vector<ToyUtterance> out;
    SeededRng rng(1);
    for (int i = 0; i < n; ++i) {
        Tokens t{i % 6, (i + 1) % 6, (i * 5) % 6, 2};
        out.push_back({t, render_text(t), encode(t, cb, 0.0, rng)});
    }
    return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("normalize_text") {
    CHECK(normalize_text("Hello,  world!") == "hello world");
    CHECK(normalize_text("") == "");
    CHECK(normalize_text("a  b\tc") == "a b c");
    CHECK(normalize_text("  padded \n") == "padded");
    CHECK(normalize_text("it's-fine.") == "itsfine");
    CHECK(normalize_text("caf\xc3\xa9 OK") == "caf\xc3\xa9 ok");
}

TEST_CASE("edit_distance examples") {
    CHECK(edit_distance(chars("abc"), chars("abc")) == EditCounts{0, 0, 0, 0});
    CHECK(edit_distance(chars("abc"), chars("abd")) == EditCounts{1, 1, 0, 0});
    CHECK(edit_distance(chars("abc"), chars("abxc")) == EditCounts{1, 0, 1, 0});
    CHECK(edit_distance(chars("abc"), chars("ac")) == EditCounts{1, 0, 0, 1});
    CHECK(edit_distance(chars(""), chars("ab")) == EditCounts{2, 0, 2, 0});
    CHECK(edit_distance(chars("ab"), chars("")) == EditCounts{2, 0, 0, 2});
}

TEST_CASE("edit_distance tie-break prefers substitution") {
    // "ab" -> "ba" can be two substitutions or an insertion plus a deletion.
    CHECK(edit_distance(chars("ab"), chars("ba")) == EditCounts{2, 2, 0, 0});
}

TEST_CASE("edit_distance matches the recursive oracle") {
    std::mt19937_64 gen(1);
    for (int i = 0; i < 500; ++i) {
        const auto a = chars(random_string(gen, 1 + i % 6, 12));
        const auto b = chars(random_string(gen, 1 + i % 6, 12));
        const auto e = edit_distance(a, b);
        REQUIRE(e.distance == testsupport::levenshtein_oracle(a, b));
        REQUIRE(e.substitutions + e.insertions + e.deletions == e.distance);
        REQUIRE(b.size() == a.size() - e.deletions + e.insertions);
    }
}

TEST_CASE("edit_distance is a metric") {
    std::mt19937_64 gen(2);
    for (int i = 0; i < 300; ++i) {
        const auto a = chars(random_string(gen, 4, 10));
        const auto b = chars(random_string(gen, 4, 10));
        const auto c = chars(random_string(gen, 4, 10));
        const auto ab = edit_distance(a, b).distance;
        CHECK(ab == edit_distance(b, a).distance);
        CHECK(edit_distance(a, c).distance <= ab + edit_distance(b, c).distance);
        CHECK((ab == 0) == (a == b));
    }
}

TEST_CASE("cer and wer examples") {
    CHECK(cer("abc", "abd").rate_pct == doctest::Approx(100.0 / 3.0));
    CHECK(wer("hello world", "hello word").rate_pct == 50.0);
    CHECK(cer("Hello, world!", "hello world").rate_pct == 0.0);
    CHECK(wer("Hello, world!", "hello world").rate_pct == 0.0);
    const auto r = cer("abc", "abd");
    CHECK(r.substitutions == 1);
    CHECK(r.ref_len == 3);
    CHECK(r.hyp_len == 3);
    CHECK_THROWS_AS(cer("", "x"), UndefinedRateError);
    CHECK_THROWS_AS(wer("?!", "x"), UndefinedRateError);
    CHECK(cer("ab", "").rate_pct == 100.0);
    CHECK(cer("a", "abc").rate_pct == 200.0);
}

TEST_CASE("cer counts code points") {
    // Two two-byte characters: one substitution out of two.
    CHECK(cer("\xc3\xa9\xc3\xa8", "\xc3\xa9\xc3\xa0").rate_pct == 50.0);
    CHECK(code_points("a\xc3\xa9\xe2\x82\xac").size() == 3);
    CHECK(code_points("\xe2\x82\xac")[0] == U'€');
    // A stray continuation byte counts on its own.
    CHECK(code_points("a\x80").size() == 2);
}

TEST_CASE("rates ignore inserted punctuation") {
    std::mt19937_64 gen(3);
    for (int i = 0; i < 100; ++i) {
        std::string ref = random_string(gen, 5, 10) + " " + random_string(gen, 5, 10);
        if (normalize_text(ref).empty()) continue;
        const std::string hyp = random_string(gen, 5, 10) + " " + random_string(gen, 5, 10);
        std::string ref_p = "," + ref + "!";
        std::string hyp_p = hyp;
        hyp_p.insert(hyp_p.size() / 2, ".");
        CHECK(cer(ref, hyp).rate_pct == cer(ref_p, hyp_p).rate_pct);
        CHECK(wer(ref, hyp).rate_pct == wer(ref_p, hyp_p).rate_pct);
    }
}

TEST_CASE("pool is a micro average") {
    const std::vector<ErrorRateReport> rs{cer("abcd", "abce"), cer("ab", "xy")};
    const auto p = pool(rs);
    CHECK(p.ref_len == 6);
    CHECK(p.substitutions == 3);
    CHECK(p.rate_pct == 50.0);
}

TEST_CASE("evaluate with ground-truth latents scores zero") {
    const auto cb = small_codebook();
    const auto eval_set = small_eval_set(cb, 10);
    const Synthesizer truth = [&](const std::vector<Tokens>&, std::uint64_t) {
        std::vector<LatentSequence> out;
        for (const auto& u : eval_set) out.push_back(u.latent);
        return out;
    };
    const std::vector<std::uint64_t> seeds{1, 2};
    const auto report = evaluate(truth, eval_set, cb, seeds);
    CHECK(report.cer.rate_pct == 0.0);
    CHECK(report.wer.rate_pct == 0.0);
    CHECK(report.rows.size() == 20);
    CHECK(report.per_seed.size() == 2);
}

TEST_CASE("evaluate pools edit counts over rows") {
    const auto cb = small_codebook();
    const auto eval_set = small_eval_set(cb, 12);
    // Seed-dependent corruption: drop the first token group for every
    // (index + seed) divisible by 3.
    const Synthesizer synth = [&](const std::vector<Tokens>& texts, std::uint64_t seed) {
        std::vector<LatentSequence> out;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            auto x = eval_set[i].latent;
            if ((i + seed) % 3 == 0) x.values().leftCols(2).setZero();
            out.push_back(x);
        }
        return out;
    };
    const std::vector<std::uint64_t> seeds{1, 2, 5};
    const auto report = evaluate(synth, eval_set, cb, seeds, 4);
    REQUIRE(report.rows.size() == 36);
    std::size_t errors = 0, ref_len = 0, werr = 0, wref = 0;
    for (const auto& row : report.rows) {
        const auto c = cer(row.reference, row.hypothesis);
        CHECK(c.errors() == row.cer.errors());
        errors += c.errors();
        ref_len += c.ref_len;
        werr += row.wer.errors();
        wref += row.wer.ref_len;
    }
    CHECK(report.cer.errors() == errors);
    CHECK(report.cer.ref_len == ref_len);
    CHECK(report.cer.rate_pct == doctest::Approx(100.0 * errors / ref_len));
    CHECK(report.wer.rate_pct == doctest::Approx(100.0 * werr / wref));
    std::size_t seed_errors = 0;
    for (const auto& s : report.per_seed) seed_errors += s.cer.errors();
    CHECK(seed_errors == errors);
    REQUIRE(report.worst.size() == 4);
    for (std::size_t i = 1; i < report.worst.size(); ++i)
        CHECK(report.worst[i - 1].cer.rate_pct >= report.worst[i].cer.rate_pct);
    CHECK(report.worst.front().cer.rate_pct > 0.0);
}

TEST_CASE("evaluate rejects a synthesizer that drops utterances") {
    const auto cb = small_codebook();
    const auto eval_set = small_eval_set(cb, 3);
    const Synthesizer short_synth = [](const std::vector<Tokens>&, std::uint64_t) {
        return std::vector<LatentSequence>{};
    };
    const std::vector<std::uint64_t> seeds{1};
    CHECK_THROWS_AS(evaluate(short_synth, eval_set, cb, seeds), UsageError);
}

}  // TEST_SUITE
