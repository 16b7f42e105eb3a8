#include "dlev/errors.hpp"
#include "dlev/metrics.hpp"

#include "helpers.hpp"
#include "metric_fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace dlev;
using testing_util::words;

namespace {

BleuConfig plain_bleu(int order) {
    BleuConfig c;
    c.max_order = order;
    c.smoothing = BleuSmoothing::None;
    return c;
}

} // namespace

TEST_CASE("hand-computed fixtures") {
    const RougeConfig rouge;
    const MeteorConfig meteor_cfg;
    for (const auto& c : fixtures::metric_cases()) {
        CAPTURE(c.candidate);
        CAPTURE(c.reference);
        const auto cand = words(c.candidate);
        const auto ref = words(c.reference);
        CHECK(bleu_n(cand, ref, plain_bleu(2)) == doctest::Approx(c.bleu2).epsilon(1e-12));
        CHECK(bleu_n(cand, ref, plain_bleu(4)) == doctest::Approx(c.bleu4).epsilon(1e-12));
        CHECK(rouge_l(cand, ref, rouge) == doctest::Approx(c.rouge_l).epsilon(1e-12));
        CHECK(meteor(cand, ref, meteor_cfg) == doctest::Approx(c.meteor).epsilon(1e-12));
    }
}

TEST_CASE("BLEU") {
    const auto cand = words("the cat sat on the mat");
    SUBCASE("identity") { CHECK(bleu_n(cand, cand, plain_bleu(4)) == 1.0); }
    SUBCASE("epsilon smoothing keeps a tiny positive value") {
        BleuConfig c;
        c.max_order = 2;
        const double v = bleu_n(words("a b"), words("b a"), c);
        CHECK(v > 0.0);
        CHECK(v == doctest::Approx(std::sqrt(1.0 * 1e-9)));
    }
    SUBCASE("multiple references clip against the per-gram maximum") {
        const std::vector<TokenSeq> refs{words("the the cat"), words("a cat")};
        const auto s = bleu_stats(words("the the the"), refs, 1);
        CHECK(s.matches[0] == 2);
        CHECK(s.totals[0] == 3);
    }
    SUBCASE("corpus BLEU sums sentence statistics") {
        const std::vector<TokenSeq> cands{words("a b c"), words("x y z w")};
        const std::vector<std::vector<TokenSeq>> refs{{words("a b d")}, {words("x y z")}};
        auto total = bleu_stats(cands[0], refs[0], 2);
        total += bleu_stats(cands[1], refs[1], 2);
        CHECK(corpus_bleu(cands, refs, plain_bleu(2)) == bleu_from_stats(total, plain_bleu(2)));
        // matches 2+3 of 3+4 unigrams, 1+2 of 2+3 bigrams, lengths 7 vs 6
        CHECK(corpus_bleu(cands, refs, plain_bleu(2)) == doctest::Approx(std::sqrt(5.0 / 7 * 3.0 / 5)));
    }
    SUBCASE("empty candidate is an error") {
        CHECK_THROWS_AS(bleu_n(std::vector<std::string>{}, cand, plain_bleu(2)), ValidationError);
    }
    SUBCASE("n-gram totals equal max(0, len - n + 1)") {
        for (int n = 1; n <= 7; ++n) {
            long total = 0;
            for (const auto& [g, c] : count_ngrams(cand, n)) total += c;
            CHECK(total == std::max(0, 6 - n + 1));
        }
    }
}

TEST_CASE("ROUGE-L") {
    const RougeConfig cfg;
    CHECK(rouge_l(words("a b c"), words("a b c"), cfg) == 1.0);
    CHECK(rouge_l(words("the dog sat"), words("the cat sat"), cfg) == doctest::Approx(2.0 / 3));
    CHECK(rouge_l(words("a b"), words("c d"), cfg) == 0.0);

    SUBCASE("LCS matches subsequence enumeration") {
        std::mt19937_64 rng(11);
        std::uniform_int_distribution<int> len(1, 10), sym(0, 4);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<std::string> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
            for (auto& w : a) w = std::string(1, static_cast<char>('a' + sym(rng)));
            for (auto& w : b) w = std::string(1, static_cast<char>('a' + sym(rng)));
            const auto l = oracle::lcs_brute_force(a, b);
            CHECK(lcs_length(a, b) == l);
            CHECK(rouge_l(a, b, cfg) ==
                  doctest::Approx(oracle::rouge_l_from_lcs(static_cast<double>(l), static_cast<double>(a.size()),
                                                           static_cast<double>(b.size()), 1.2))
                      .epsilon(1e-12));
        }
    }
    SUBCASE("best reference wins") {
        const std::vector<TokenSeq> refs{words("x y"), words("a b c")};
        CHECK(rouge_l(words("a b c"), refs, cfg) == doctest::Approx(1.0));
    }
}

TEST_CASE("METEOR") {
    const MeteorConfig cfg;
    SUBCASE("identical sentence of length 4") {
        CHECK(meteor(words("a b c d"), words("a b c d"), cfg) == doctest::Approx(1.0 - 0.5 / 64));
    }
    SUBCASE("no matches") { CHECK(meteor(words("a b"), words("c d"), cfg) == 0.0); }
    SUBCASE("stem stage aligns cats with cat") {
        const auto al = meteor_align(words("cats sat"), words("cat sat"), cfg);
        CHECK(al.matches.size() == 2);
        CHECK(al.chunks == 1);
        MeteorConfig exact_only = cfg;
        exact_only.stages = {MeteorStage::Exact};
        CHECK(meteor_align(words("cats sat"), words("cat sat"), exact_only).matches.size() == 1);
    }
    SUBCASE("stemmer") {
        CHECK(meteor_stem("playing") == "play");
        CHECK(meteor_stem("played") == "play");
        CHECK(meteor_stem("cats") == "cat");
        CHECK(meteor_stem("is") == "is");
    }
    SUBCASE("scores stay in [0,1]") {
        std::mt19937_64 rng(3);
        std::uniform_int_distribution<int> len(1, 8), sym(0, 5);
        for (int t = 0; t < 100; ++t) {
            std::vector<std::string> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
            for (auto& w : a) w = std::string(1, static_cast<char>('a' + sym(rng)));
            for (auto& w : b) w = std::string(1, static_cast<char>('a' + sym(rng)));
            const double v = meteor(a, b, cfg);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}
