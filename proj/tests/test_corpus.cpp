#include "dlev/corpus.hpp"
#include "dlev/errors.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace dlev;
using testing_util::make_example;

namespace {

const char* kThreeLines =
    R"({"context_id":"c1","context":["hi there","how are you"],"model_response":"fine","reference_response":"good thanks","human_score":4,"source_model":"HRED"})"
    "\n"
    R"({"context_id":"c1","context":["hi there","how are you"],"model_response":"i am ok","reference_response":"good thanks","human_score":3.5,"source_model":"TFIDF"})"
    "\n\n"
    R"({"context_id":"c2","context":["what time is it"],"model_response":"noon","reference_response":"almost noon","human_score":5,"source_model":"human"})"
    "\n";

Dataset grid(int contexts, int per_context) {
    Dataset ds;
    for (int c = 0; c < contexts; ++c) {
        for (int k = 0; k < per_context; ++k) {
            ds.push_back(make_example("ctx" + std::to_string(c), {"hello"}, "r" + std::to_string(k), "ref", 3));
        }
    }
    return ds;
}

} // namespace

TEST_CASE("parse a well-formed dataset") {
    std::istringstream in(kThreeLines);
    const auto ds = parse_dataset(in, "mem");
    REQUIRE(ds.size() == 3);
    CHECK(ds[0].context.utterances.size() == 2);
    CHECK(ds[1].human_score == 3.5);
    CHECK(ds[1].source_model == SourceModel::TFIDF);
    CHECK(ds[2].source_model == SourceModel::HUMAN);
    CHECK(ds[2].line == 4);
}

TEST_CASE("out-of-range human score names its line") {
    std::istringstream in(
        R"({"context_id":"c1","context":["a"],"model_response":"b","reference_response":"c","human_score":3,"source_model":"DE"})"
        "\n"
        R"({"context_id":"c2","context":["a"],"model_response":"b","reference_response":"c","human_score":7,"source_model":"DE"})"
        "\n");
    try {
        parse_dataset(in, "scores.jsonl");
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("scores.jsonl:2") != std::string::npos);
    }
}

TEST_CASE("context id reused with different turns is rejected") {
    std::istringstream in(
        R"({"context_id":"c1","context":["a"],"model_response":"b","reference_response":"c","human_score":3,"source_model":"DE"})"
        "\n"
        R"({"context_id":"c1","context":["x"],"model_response":"b","reference_response":"c","human_score":3,"source_model":"DE"})"
        "\n");
    CHECK_THROWS_AS(parse_dataset(in, "mem"), ValidationError);
}

TEST_CASE("dataset round-trips through JSONL") {
    std::istringstream in(kThreeLines);
    const auto ds = parse_dataset(in, "mem");
    std::ostringstream out;
    write_dataset(out, ds);
    std::istringstream back(out.str());
    const auto again = parse_dataset(back, "mem");
    REQUIRE(again.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(again[i].model_response.text == ds[i].model_response.text);
        CHECK(again[i].human_score == ds[i].human_score);
        CHECK(again[i].source_model == ds[i].source_model);
    }
}

TEST_CASE("split by context") {
    SUBCASE("1026 contexts of 4 responses at 0.7/0.15/0.15") {
        const auto ds = grid(1026, 4);
        const auto s = split_by_context(ds, {0.7, 0.15, 0.15}, 42);
        CHECK(s.train.size() == 2872);
        CHECK(s.validation.size() == 616);
        CHECK(s.test.size() == 616);
        std::set<std::string> train_ids, other;
        for (const auto& e : s.train) train_ids.insert(e.context.context_id);
        for (const auto& e : s.validation) other.insert(e.context.context_id);
        for (const auto& e : s.test) other.insert(e.context.context_id);
        for (const auto& id : other) CHECK(train_ids.count(id) == 0);
    }
    SUBCASE("one shared context cannot be split") {
        CHECK_THROWS_AS(split_by_context(grid(1, 10), {0.7, 0.15, 0.15}, 1), ValidationError);
    }
    SUBCASE("fixed seed gives the same split") {
        const auto ds = grid(10, 3);
        const auto a = split_by_context(ds, {0.6, 0.2, 0.2}, 9);
        const auto b = split_by_context(ds, {0.6, 0.2, 0.2}, 9);
        REQUIRE(a.train.size() == b.train.size());
        for (std::size_t i = 0; i < a.train.size(); ++i)
            CHECK(a.train[i].context.context_id == b.train[i].context.context_id);
    }
    SUBCASE("ratios must sum to one") {
        CHECK_THROWS_AS(split_by_context(grid(10, 1), {0.5, 0.2, 0.2}, 1), ValidationError);
    }
}

TEST_CASE("speaker tokens are stripped") {
    CHECK(strip_speaker_tokens("<first_speaker> hello there <second_speaker> hi") == "hello there hi");
    CHECK(strip_speaker_tokens("a <b> c") == "a <b> c");
}

TEST_CASE("BPE learning") {
    SUBCASE("zero merges falls back to characters") {
        const std::vector<std::string> texts{"ab ab"};
        const auto m = learn_bpe(texts, 0);
        CHECK(m.empty());
        CHECK(bpe_symbols("ab", m) == std::vector<std::string>{"a", "b</w>"});
    }
    SUBCASE("aaab aaab merges a+a first") {
        const std::vector<std::string> texts{"aaab aaab"};
        const auto m = learn_bpe(texts, 1);
        REQUIRE(m.size() == 1);
        CHECK(m.rules[0] == std::pair<std::string, std::string>{"a", "a"});
        CHECK(m.rules == oracle::bpe_brute_force({"aaab", "aaab"}, 1));
    }
    SUBCASE("low low lower against the pair-count oracle") {
        const std::vector<std::string> texts{"low low lower"};
        const auto m = learn_bpe(texts, 2);
        CHECK(m.rules == oracle::bpe_brute_force({"low", "low", "lower"}, 2));
        CHECK(m.rules[0] == std::pair<std::string, std::string>{"l", "o"});
    }
    SUBCASE("random corpora against the pair-count oracle") {
        std::mt19937_64 rng(5);
        std::uniform_int_distribution<int> letter(0, 3), len(1, 6), nwords(1, 12);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<std::string> ws;
            std::string text;
            const int n = nwords(rng);
            for (int i = 0; i < n; ++i) {
                std::string w;
                const int l = len(rng);
                for (int k = 0; k < l; ++k) w += static_cast<char>('a' + letter(rng));
                ws.push_back(w);
                text += (i ? " " : "") + w;
            }
            const std::vector<std::string> texts{text};
            CHECK(learn_bpe(texts, 8).rules == oracle::bpe_brute_force(ws, 8));
        }
    }
}

TEST_CASE("BPE tokenization") {
    BpeMerges aa;
    aa.rules.push_back({"a", "a"});
    CHECK(bpe_segment_word("aaab", aa) == std::vector<std::string>{"aa", "a", "b</w>"});

    const Vocabulary vocab(std::vector<std::string>{"a", "b</w>"});
    const auto ids = bpe_tokenize("ab", BpeMerges{}, vocab);
    CHECK(ids == std::vector<int>{vocab.id("a"), vocab.id("b</w>"), Vocabulary::kEndOfUtterance});

    const auto unk = bpe_tokenize("zz qq", BpeMerges{}, vocab);
    REQUIRE(unk.size() == 5);
    for (std::size_t i = 0; i + 1 < unk.size(); ++i) CHECK(unk[i] == Vocabulary::kUnk);

    std::vector<std::string> round{"he", "llo</w>", "wor", "ld</w>"};
    CHECK(detokenize(round) == "hello world");
}

TEST_CASE("vocabulary construction") {
    SUBCASE("three symbols fit") {
        const std::vector<std::string> texts{"ab c ab"};
        const auto v = build_vocab(texts, BpeMerges{}, 100);
        CHECK(v.size() == 3 + Vocabulary::kNumReserved);
    }
    SUBCASE("max size keeps the most frequent") {
        // j</w> is the most frequent symbol
        const std::vector<std::string> texts{"a b c d e f g h i j j j j"};
        const auto v = build_vocab(texts, BpeMerges{}, 5);
        REQUIRE(v.size() == 5);
        CHECK(v.regular_tokens()[0] == "j</w>");
    }
    SUBCASE("identical input, identical ids") {
        const std::vector<std::string> texts{"the cat sat on the mat", "a dog"};
        const auto m = learn_bpe(texts, 5);
        const auto a = build_vocab(texts, m, 50);
        const auto b = build_vocab(texts, m, 50);
        REQUIRE(a.size() == b.size());
        for (int i = 0; i < a.size(); ++i) CHECK(a.token(i) == b.token(i));
    }
    SUBCASE("files round-trip") {
        testing_util::TempDir dir("vocab");
        const std::vector<std::string> texts{"lower lowest low"};
        const auto m = learn_bpe(texts, 4);
        const auto v = build_vocab(texts, m, 50);
        save_merges(dir / "bpe.txt", m);
        save_vocab(dir / "vocab.txt", v);
        CHECK(load_merges(dir / "bpe.txt").rules == m.rules);
        const auto v2 = load_vocab(dir / "vocab.txt");
        REQUIRE(v2.size() == v.size());
        for (int i = 0; i < v.size(); ++i) CHECK(v2.token(i) == v.token(i));
    }
}
