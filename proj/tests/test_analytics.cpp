#include "dlev/analytics.hpp"
#include "dlev/errors.hpp"
#include "dlev/synth.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

using namespace dlev;

namespace {

const SourceModel kFour[4] = {SourceModel::TFIDF, SourceModel::DE, SourceModel::HRED, SourceModel::HUMAN};

struct Grouped {
    std::vector<double> human, metric;
    std::vector<SourceModel> sources;
};

// Four models with human means 1.5, 2.5, 3.5, 4.5 and per-example spread.
Grouped four_models(double (*metric_of)(double, int)) {
    Grouped g;
    for (int m = 0; m < 4; ++m) {
        for (int k = 0; k < 5; ++k) {
            const double h = 1.5 + m + 0.2 * (k - 2);
            g.human.push_back(h);
            g.metric.push_back(metric_of(h, m));
            g.sources.push_back(kFour[m]);
        }
    }
    return g;
}

std::vector<EncodedExample> encoded_realizable(int contexts, std::uint64_t seed) {
    SynthConfig s;
    s.contexts = contexts;
    s.pca_dim = 6;
    s.bpe_merges = 60;
    s.encoder.embed_dim = 6;
    s.encoder.utterance_hidden = 8;
    s.encoder.context_hidden = 10;
    const auto syn = generate_synth(s, seed);
    return encode_examples(syn.dataset, *syn.encoder, &*syn.pca);
}

} // namespace

TEST_CASE("system-level correlation") {
    SUBCASE("metric = human + 0.5") {
        const auto g = four_models([](double h, int) { return h + 0.5; });
        const auto r = system_level_correlation(g.human, g.metric, g.sources);
        CHECK(r.correlation.coefficient == doctest::Approx(1.0).epsilon(1e-14));
        REQUIRE(r.summary.size() == 4);
        CHECK(r.summary[0].source == SourceModel::TFIDF);
        CHECK(r.summary[0].count == 5);
        CHECK(r.summary[3].mean_human == doctest::Approx(4.5));
    }
    SUBCASE("reversed ordering gives -1") {
        const auto g = four_models([](double, int m) { return 4.0 - m; });
        CHECK(system_level_correlation(g.human, g.metric, g.sources).correlation.coefficient ==
              doctest::Approx(-1.0).epsilon(1e-14));
    }
    SUBCASE("constant metric means") {
        const auto g = four_models([](double, int) { return 2.0; });
        CHECK_THROWS_AS(system_level_correlation(g.human, g.metric, g.sources), NumericalError);
    }
    SUBCASE("needs three models") {
        const std::vector<double> h{1, 2, 3, 4}, m{1, 2, 3, 4};
        const std::vector<SourceModel> s{SourceModel::DE, SourceModel::DE, SourceModel::HRED, SourceModel::HRED};
        CHECK_THROWS_AS(system_level_correlation(h, m, s), ValidationError);
    }
    SUBCASE("permuting within a model changes nothing") {
        auto g = four_models([](double h, int m) { return h * h - m; });
        const double before = system_level_correlation(g.human, g.metric, g.sources).correlation.coefficient;
        std::reverse(g.metric.begin(), g.metric.begin() + 5);
        std::reverse(g.human.begin() + 5, g.human.begin() + 10);
        CHECK(system_level_correlation(g.human, g.metric, g.sources).correlation.coefficient ==
              doctest::Approx(before).epsilon(1e-14));
    }
}

TEST_CASE("score normalization") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> h(1, 5);
    std::vector<double> metric, human;
    for (int i = 0; i < 300; ++i) {
        metric.push_back(i % 10 == 0 ? 0.0 : u(rng));
        human.push_back(h(rng));
    }
    const auto n = normalize_scores(metric, human);
    CHECK(std::abs(mean(n.pre_clip) - mean(human)) < 1e-9);
    CHECK(std::abs(variance(n.pre_clip) - variance(human)) < 1e-9);
    for (std::size_t i = 0; i < metric.size(); ++i) {
        if (metric[i] == 0.0) CHECK(n.normalized[i] == 1.0);
        CHECK(n.normalized[i] >= 1.0);
        CHECK(n.normalized[i] <= 5.0);
    }

    SUBCASE("non-decreasing") {
        std::vector<std::size_t> order(metric.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return metric[a] < metric[b]; });
        for (std::size_t k = 1; k < order.size(); ++k) CHECK(n.normalized[order[k - 1]] <= n.normalized[order[k]]);
    }
    SUBCASE("fixed point") {
        const auto same = normalize_scores(human, human);
        for (std::size_t i = 0; i < human.size(); ++i) CHECK(same.pre_clip[i] == doctest::Approx(human[i]));
    }
    SUBCASE("constant metric") {
        const std::vector<double> c(10, 0.3), hh(10, 2.0);
        CHECK_THROWS_AS(normalize_scores(c, hh), NumericalError);
    }
}

TEST_CASE("length bias") {
    SUBCASE("identical groups") {
        const std::vector<int> dw{1, 2, 9, 10};
        const std::vector<double> s{3, 4, 3, 4};
        const auto r = length_bias_report(dw, s);
        CHECK(r.test.t == 0.0);
        CHECK(r.test.p_value == doctest::Approx(1.0));
        CHECK_FALSE(r.length_biased);
    }
    SUBCASE("metric = -delta_w is flagged") {
        std::vector<int> dw;
        std::vector<double> s;
        for (int i = 0; i < 60; ++i) {
            dw.push_back(i % 15);
            s.push_back(-dw.back());
        }
        const auto r = length_bias_report(dw, s, 6);
        CHECK(r.test.n_a == 28);
        CHECK(r.test.n_b == 32);
        CHECK(r.test.p_value < 1e-6);
        CHECK(r.length_biased);
    }
    SUBCASE("empty group") {
        const std::vector<int> dw{1, 2};
        const std::vector<double> s{1, 2};
        CHECK_THROWS_AS(length_bias_report(dw, s), ValidationError);
    }
    SUBCASE("delta words") {
        const auto ex = testing_util::make_example("c", {"x"}, "a b c", "a b c d e f g h i j", 3);
        CHECK(delta_words(ex) == 7);
    }
}

TEST_CASE("failure slices") {
    // human, bleu2, rouge, adem (normalized)
    const std::vector<double> human{4.5, 4.0, 5.0, 3.0, 4.2, 4.8};
    const std::vector<double> bleu{1.2, 1.0, 4.5, 1.0, 1.5, 1.9};
    const std::vector<double> rouge{1.0, 3.0, 1.0, 1.0, 1.1, 1.9};
    const std::vector<double> adem{4.5, 1.5, 1.2, 5.0, 3.0, 4.1};
    const auto f = failure_slice(human, bleu, rouge, adem);
    CHECK(f.total == 6);
    CHECK(f[FailureSlice::HumanHigh] == std::vector<std::size_t>{0, 1, 2, 4, 5});
    CHECK(f[FailureSlice::HumanHighOverlapLow] == std::vector<std::size_t>{0, 4, 5});
    CHECK(f[FailureSlice::HumanHighOverlapLowAdemHigh] == std::vector<std::size_t>{0, 5});
    CHECK(f[FailureSlice::HumanHighAdemLow] == std::vector<std::size_t>{1, 2});
    CHECK(f[FailureSlice::HumanHighAdemLowOverlapHigh] == std::vector<std::size_t>{2});

    SUBCASE("metrics equal to human leave the overlap-miss slice empty") {
        const auto g = failure_slice(human, human, human, human);
        CHECK(g[FailureSlice::HumanHighOverlapLow].empty());
    }
    SUBCASE("default thresholds") {
        const FailureThresholds th;
        CHECK(th.high == 4.0);
        CHECK(th.low == 2.0);
        CHECK(describe(FailureSlice::HumanHighOverlapLow).find("bleu2") != std::string_view::npos);
    }
}

TEST_CASE("undefined correlations are empty") {
    const std::vector<double> p{1, 1, 1, 1}, h{1, 2, 3, 4};
    const auto c = correlate(p, h);
    CHECK_FALSE(c.pearson.has_value());
    CHECK_FALSE(c.spearman.has_value());
    const auto d = correlate(h, h);
    REQUIRE(d.pearson.has_value());
    CHECK(d.pearson->coefficient == doctest::Approx(1.0));
}

TEST_CASE("sweeps and leave-one-out") {
    const auto all = encoded_realizable(60, 21);
    std::vector<EncodedExample> train(all.begin(), all.begin() + 160), val(all.begin() + 160, all.begin() + 200),
        test(all.begin() + 200, all.end());

    SUBCASE("context subsets") {
        CHECK(context_subset(train, 1.0, 3).size() == train.size());
        const auto half = context_subset(train, 0.5, 3);
        CHECK(half.size() == 80); // 20 of 40 contexts, 4 responses each
        CHECK(std::is_sorted(half.begin(), half.end()));
        CHECK(half == context_subset(train, 0.5, 3));
        std::set<std::string> ids;
        for (auto i : half) ids.insert(train[i].context_id);
        CHECK(ids.size() == 20);
        CHECK_THROWS_AS(context_subset(train, 0.001, 3), ValidationError);
    }

    AdemFitOptions fit;
    fit.train.max_epochs = 4;
    fit.train.seed = 5;

    SUBCASE("fraction 1.0 reproduces a full fit") {
        SweepConfig sc;
        sc.fit = fit;
        sc.fractions = {1.0, 0.5};
        const auto rows = data_efficiency_sweep(train, val, test, sc);
        REQUIRE(rows.size() == 2);
        const auto full = fit_adem(train, val, fit);
        const auto c = correlate(score_encoded(full.params, test), [&] {
            std::vector<double> h;
            for (const auto& e : test) h.push_back(e.human);
            return h;
        }());
        CHECK(rows[0].pearson == c.pearson->coefficient);
        CHECK(rows[0].train_examples == train.size());
        CHECK(rows[1].train_contexts == 20);
    }
    SUBCASE("leave one out") {
        const auto r = leave_one_out_eval(train, val, test, fit);
        REQUIRE(r.rows.size() == 6);
        CHECK(r.rows.front().label == "all");
        CHECK(r.rows.back().label == "random control");
        std::size_t largest = 0;
        for (std::size_t k = 1; k + 1 < r.rows.size(); ++k) {
            const auto& row = r.rows[k];
            REQUIRE(row.held_out.has_value());
            for (auto i : row.train_indices) CHECK(train[i].source != *row.held_out);
            largest = std::max(largest, row.train_indices.size());
            CHECK(row.held_out_test_count == 10);
        }
        CHECK(r.rows.back().train_indices.size() == largest);
    }
}
