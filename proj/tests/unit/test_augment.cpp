#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "rsflow/augment.hpp"
#include "support.hpp"

using namespace rsflow;
using testsupport::iota_row;
using testsupport::row_latent;
using testsupport::row_values;

namespace {

std::set<Eigen::Index> union_of_targets(const std::vector<AugmentEdit>& edits) {
    std::set<Eigen::Index> frames;
    for (const auto& e : edits) {
        Eigen::Index from = 0, len = 0;
        if (const auto* r = std::get_if<RepeatEdit>(&e)) {
            from = r->target;
            len = r->length;
        } else {
            from = std::get<SkipEdit>(e).start;
            len = std::get<SkipEdit>(e).length;
        }
        for (Eigen::Index j = from; j < from + len; ++j) frames.insert(j);
    }
    return frames;
}

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("sample_mode degenerate probabilities") {
    AugmentConfig cfg;
    SeededRng rng(1);
    cfg.p_repeat = 1.0;
    for (int i = 0; i < 200; ++i) REQUIRE(sample_mode(rng, cfg) == AugmentMode::Repeat);
    cfg.p_repeat = 0.0;
    for (int i = 0; i < 200; ++i) REQUIRE(sample_mode(rng, cfg) == AugmentMode::Skip);
}

TEST_CASE("sample_mode frequency at p = 0.5") {
    AugmentConfig cfg;
    SeededRng rng(2);
    int repeats = 0;
    for (int i = 0; i < 10000; ++i) repeats += sample_mode(rng, cfg) == AugmentMode::Repeat;
    CHECK(std::abs(repeats / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("sample_budget ranges and means") {
    AugmentConfig cfg;
    SeededRng rng(3);
    double rep_sum = 0.0, skip_sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double r = sample_budget(AugmentMode::Repeat, rng, cfg);
        const double s = sample_budget(AugmentMode::Skip, rng, cfg);
        REQUIRE(r >= 0.2);
        REQUIRE(r <= 0.4);
        REQUIRE(s >= 0.4);
        REQUIRE(s <= 0.8);
        rep_sum += r;
        skip_sum += s;
    }
    CHECK(std::abs(rep_sum / 10000.0 - 0.30) <= 0.01);
    CHECK(std::abs(skip_sum / 10000.0 - 0.60) <= 0.01);
}

TEST_CASE("sample_span_length bounds") {
    AugmentConfig cfg;
    SeededRng rng(4);
    for (int i = 0; i < 2000; ++i) {
        const auto l = sample_span_length(200, rng, cfg);
        REQUIRE(l >= 2);
        REQUIRE(l <= 100);
    }
    for (int i = 0; i < 100; ++i) REQUIRE(sample_span_length(3, rng, cfg) == 2);
    // T = 2 leaves only a single frame.
    CHECK(sample_span_length(2, rng, cfg) == 1);
    CHECK_THROWS_AS(sample_span_length(1, rng, cfg), DegenerateInputError);
}

TEST_CASE("sample_span_length is uniform over [2, 100]") {
    AugmentConfig cfg;
    SeededRng rng(5);
    constexpr int kDraws = 10000;
    std::vector<int> counts(101, 0);
    for (int i = 0; i < kDraws; ++i) ++counts[static_cast<std::size_t>(sample_span_length(200, rng, cfg))];
    const double p = 1.0 / 99.0;
    const double expected = kDraws * p;
    const double sigma = std::sqrt(kDraws * p * (1.0 - p));
    double chi2 = 0.0;
    for (int l = 2; l <= 100; ++l) {
        const double c = counts[static_cast<std::size_t>(l)];
        CHECK_MESSAGE(std::abs(c - expected) <= 3.0 * sigma, "length " << l << " drawn " << c << " times");
        chi2 += (c - expected) * (c - expected) / expected;
    }
    // 98 degrees of freedom; 99.9th percentile is about 148.
    CHECK(chi2 < 148.0);
}

TEST_CASE("repeat_overwrite examples") {
    const auto x = row_latent(iota_row(10));
    CHECK(row_values(repeat_overwrite(x, 0, 3, 5)) == std::vector<float>{0, 1, 2, 3, 4, 0, 1, 2, 8, 9});
    CHECK(row_values(repeat_overwrite(x, 0, 1, 9)) == std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8, 0});
    CHECK_THROWS_AS(repeat_overwrite(x, 4, 2, 4), InvalidEditError);
    CHECK_THROWS_AS(repeat_overwrite(x, 0, 3, 8), RangeError);
    CHECK_THROWS_AS(repeat_overwrite(x, 8, 3, 0), RangeError);
}

TEST_CASE("overlapping repeat copies from a snapshot") {
    const auto x = row_latent(iota_row(10));
    const auto out = repeat_overwrite(x, 2, 4, 4);
    CHECK(out == testsupport::snapshot_copy(x, 2, 4, 4));
    CHECK(row_values(out) == std::vector<float>{0, 1, 2, 3, 2, 3, 4, 5, 8, 9});

    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 200; ++trial) {
        const auto y = testsupport::random_latent(3, 30, gen);
        std::uniform_int_distribution<int> len_d(1, 15);
        const int len = len_d(gen);
        std::uniform_int_distribution<int> pos_d(0, 30 - len);
        const int s = pos_d(gen);
        int k = pos_d(gen);
        if (k == s) continue;
        REQUIRE(repeat_overwrite(y, s, len, k) == testsupport::snapshot_copy(y, s, len, k));
    }
}

TEST_CASE("skip_shift examples") {
    const auto x = row_latent(iota_row(10));
    const auto sil = row_latent(std::vector<float>(10, -1.0f));
    CHECK(row_values(skip_shift(x, 3, 4, sil)) == std::vector<float>{0, 1, 2, 7, 8, 9, -1, -1, -1, -1});
    CHECK(row_values(skip_shift(x, 0, 10, sil)) == std::vector<float>(10, -1.0f));
    CHECK(row_values(skip_shift(x, 9, 1, sil)) == std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8, -1});
    CHECK_THROWS_AS(skip_shift(x, 8, 3, sil), RangeError);
    CHECK_THROWS_AS(skip_shift(x, 0, 4, row_latent({-1, -1})), RangeError);
    CHECK_THROWS_AS(skip_shift(x, 0, 2, LatentSequence::zeros(2, 10, 20)), ShapeError);
}

TEST_CASE("skip_shift uses the head of the silence latent") {
    const auto x = row_latent(iota_row(6));
    const auto sil = row_latent({100, 101, 102, 103, 104, 105});
    CHECK(row_values(skip_shift(x, 1, 2, sil)) == std::vector<float>{0, 3, 4, 5, 100, 101});
}

TEST_CASE("augment with forced repeat replays through repeat_overwrite") {
    std::mt19937_64 gen(13);
    const auto x = testsupport::random_latent(4, 100, gen);
    const auto sil = LatentSequence::zeros(4, 100, 20);
    AugmentConfig cfg;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SeededRng rng(seed);
        const auto out = augment(x, sil, rng, cfg, {AugmentMode::Repeat, 0.2});
        CHECK(out.mode == AugmentMode::Repeat);
        CHECK(out.budget == 0.2);
        CHECK(out.realized_coverage >= 0.2);
        LatentSequence replay = x;
        for (const auto& e : out.edits) {
            const auto& r = std::get<RepeatEdit>(e);
            replay = repeat_overwrite(replay, r.source, r.length, r.target);
        }
        CHECK(replay == out.latent);
    }
}

TEST_CASE("augment preserves length over random inputs") {
    std::mt19937_64 gen(21);
    AugmentConfig cfg;
    SeededRng rng(21);
    for (int i = 0; i < 10000; ++i) {
        std::uniform_int_distribution<int> t_d(2, 120);
        std::uniform_int_distribution<int> c_d(1, 4);
        const int T = t_d(gen);
        const int C = c_d(gen);
        rsflow::Matrix<float> m = rsflow::Matrix<float>::Random(C, T);
        const LatentSequence x(m, 20.0);
        const auto sil = LatentSequence::zeros(C, T, 20.0);
        const auto out = augment(x, sil, rng, cfg);
        REQUIRE(out.latent.frames() == T);
        REQUIRE(out.latent.channels() == C);
        REQUIRE(!out.edits.empty());
    }
}

TEST_CASE("single skip edit ends in silence") {
    std::mt19937_64 gen(17);
    const auto x = testsupport::random_latent(3, 40, gen);
    rsflow::Matrix<float> sm = rsflow::Matrix<float>::Constant(3, 40, 7.5f);
    const LatentSequence sil(sm, 20.0);
    AugmentConfig cfg;
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        SeededRng rng(seed);
        const auto out = augment(x, sil, rng, cfg, {AugmentMode::Skip, 0.01});
        REQUIRE(out.edits.size() == 1);
        const auto e = std::get<SkipEdit>(out.edits.front());
        const Eigen::Index T = 40;
        for (Eigen::Index j = 0; j < e.start; ++j) CHECK(out.latent.frame(j) == x.frame(j));
        for (Eigen::Index j = e.start; j < T - e.length; ++j) CHECK(out.latent.frame(j) == x.frame(j + e.length));
        for (Eigen::Index j = T - e.length; j < T; ++j) CHECK(out.latent.frame(j) == sil.frame(j - (T - e.length)));
        ++checked;
    }
    CHECK(checked == 40);
}

TEST_CASE("repeat edits leave untargeted frames untouched") {
    std::mt19937_64 gen(19);
    const auto x = testsupport::random_latent(2, 80, gen);
    const auto sil = LatentSequence::zeros(2, 80, 20);
    AugmentConfig cfg;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        SeededRng rng(seed);
        const auto out = augment(x, sil, rng, cfg, {AugmentMode::Repeat, std::nullopt});
        const auto touched = union_of_targets(out.edits);
        for (Eigen::Index j = 0; j < 80; ++j)
            if (!touched.count(j)) REQUIRE(out.latent.frame(j) == x.frame(j));
    }
}

TEST_CASE("coverage accounting and stopping rule") {
    std::mt19937_64 gen(23);
    const auto x = testsupport::random_latent(2, 48, gen);
    const auto sil = LatentSequence::zeros(2, 48, 20);
    AugmentConfig cfg;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        SeededRng rng(seed);
        const auto out = augment(x, sil, rng, cfg);
        const double recomputed = static_cast<double>(union_of_targets(out.edits).size()) / 48.0;
        REQUIRE(recomputed == out.realized_coverage);
        REQUIRE(coverage_of(out.edits, 48) == out.realized_coverage);
        REQUIRE(out.realized_coverage >= out.budget);
        REQUIRE(out.realized_coverage <= 1.0);
        if (out.edits.size() > 1) REQUIRE(out.coverage_before_last < out.budget);
        // The coverage before the last edit is that of all earlier edits.
        std::vector<AugmentEdit> earlier(out.edits.begin(), out.edits.end() - 1);
        REQUIRE(coverage_of(earlier, 48) == out.coverage_before_last);
    }
}

TEST_CASE("augment is deterministic per seed") {
    std::mt19937_64 gen(29);
    const auto x = testsupport::random_latent(3, 48, gen);
    const auto sil = LatentSequence::zeros(3, 48, 20);
    AugmentConfig cfg;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SeededRng a(seed), b(seed);
        const auto oa = augment(x, sil, a, cfg);
        const auto ob = augment(x, sil, b, cfg);
        CHECK(oa.latent == ob.latent);
        CHECK(oa.edits == ob.edits);
        CHECK(oa.budget == ob.budget);
    }
}

TEST_CASE("augment rejects sequences shorter than two frames") {
    SeededRng rng(0);
    const auto x = row_latent({1});
    CHECK_THROWS_AS(augment(x, x, rng, AugmentConfig{}), DegenerateInputError);
}

TEST_CASE("roll_batch") {
    CHECK(roll_batch(std::vector<char>{'a', 'b', 'c'}) == std::vector<char>{'b', 'c', 'a'});
    CHECK(roll_batch(std::vector<char>{'a', 'b'}) == std::vector<char>{'b', 'a'});
    CHECK_THROWS_AS(roll_batch(std::vector<char>{'a'}), BatchTooSmallError);
    CHECK_THROWS_AS(roll_batch(std::vector<char>{}), BatchTooSmallError);
    for (int b = 2; b < 20; ++b) {
        std::vector<int> idx(static_cast<std::size_t>(b));
        for (int i = 0; i < b; ++i) idx[static_cast<std::size_t>(i)] = i;
        const auto rolled = roll_batch(idx);
        for (int i = 0; i < b; ++i) CHECK(rolled[static_cast<std::size_t>(i)] != i);
    }
}

TEST_CASE("AugmentConfig validation") {
    AugmentConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.repeat_budget = {0.5, 0.3};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = AugmentConfig{};
    cfg.p_repeat = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = AugmentConfig{};
    cfg.span_seconds = {0.001, 5.0};
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("describe edits") {
    CHECK(describe(RepeatEdit{0, 5, 3}) == "repeat source=0 target=5 length=3");
    CHECK(describe(SkipEdit{3, 4}) == "skip start=3 length=4");
}

}  // TEST_SUITE
