#include "dlev/analytics.hpp"

#include "dlev/errors.hpp"
#include "dlev/seed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <unordered_set>

namespace dlev {

namespace {

void require_aligned(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw ValidationError(std::string(what) + ": score columns are not aligned");
}

template <class T>
std::vector<T> gather(std::span<const T> xs, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(xs[i]);
    return out;
}

std::vector<double> humans_of(std::span<const EncodedExample> xs) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (const auto& e : xs) out.push_back(e.human);
    return out;
}

} // namespace

SystemSummary summarize_by_model(std::span<const double> human, std::span<const double> metric,
                                 std::span<const SourceModel> sources) {
    require_aligned(human.size(), metric.size(), "system summary");
    require_aligned(human.size(), sources.size(), "system summary");
    std::map<SourceModel, ModelSummary> acc;
    for (std::size_t i = 0; i < human.size(); ++i) {
        auto& m = acc[sources[i]];
        m.source = sources[i];
        ++m.count;
        m.mean_human += human[i];
        m.mean_metric += metric[i];
    }
    SystemSummary out;
    for (auto& [src, m] : acc) {
        m.mean_human /= static_cast<double>(m.count);
        m.mean_metric /= static_cast<double>(m.count);
        out.push_back(m);
    }
    return out;
}

SystemCorrelation system_level_correlation(std::span<const double> human, std::span<const double> metric,
                                           std::span<const SourceModel> sources) {
    SystemCorrelation r;
    r.summary = summarize_by_model(human, metric, sources);
    if (r.summary.size() < 3) {
        throw ValidationError("system-level correlation needs at least 3 source models, got " +
                              std::to_string(r.summary.size()));
    }
    std::vector<double> mh;
    std::vector<double> mm;
    for (const auto& m : r.summary) {
        mh.push_back(m.mean_human);
        mm.push_back(m.mean_metric);
    }
    r.correlation = pearson(mm, mh);
    return r;
}

NormalizedScores normalize_scores(std::span<const double> metric, std::span<const double> human) {
    if (metric.empty() || human.empty()) throw ValidationError("normalization needs non-empty score columns");
    const double vm = variance(metric);
    const auto [lo, hi] = std::minmax_element(metric.begin(), metric.end());
    if (*lo == *hi || !(vm > 0.0)) throw NumericalError("cannot normalize constant metric scores");
    const double mm = mean(metric);
    const double mh = mean(human);
    const double scale = std::sqrt(variance(human) / vm);

    NormalizedScores out;
    out.pre_clip.reserve(metric.size());
    out.normalized.reserve(metric.size());
    for (double x : metric) {
        const double y = mh + (x - mm) * scale;
        out.pre_clip.push_back(y);
        out.normalized.push_back(x == 0.0 ? 1.0 : std::clamp(y, 1.0, 5.0));
    }
    return out;
}

int delta_words(const EvalExample& ex) {
    const auto a = static_cast<int>(split_words(ex.reference_response.text).size());
    const auto b = static_cast<int>(split_words(ex.model_response.text).size());
    return std::abs(a - b);
}

LengthBiasReport length_bias_report(std::span<const int> delta_w, std::span<const double> scores, int threshold) {
    require_aligned(delta_w.size(), scores.size(), "length bias");
    std::vector<double> small;
    std::vector<double> large;
    for (std::size_t i = 0; i < scores.size(); ++i) (delta_w[i] <= threshold ? small : large).push_back(scores[i]);
    if (small.empty() || large.empty()) {
        throw ValidationError("length-bias split at delta_w " + std::to_string(threshold) + " leaves an empty group");
    }
    LengthBiasReport r;
    r.threshold = threshold;
    r.test = welch_t_test(small, large);
    r.length_biased = r.test.p_value < 0.05 && r.test.mean_a > r.test.mean_b;
    return r;
}

std::string_view describe(FailureSlice s) {
    switch (s) {
    case FailureSlice::HumanHigh:
        return "human>=high";
    case FailureSlice::HumanHighOverlapLow:
        return "human>=high & bleu2<low & rouge_l<low";
    case FailureSlice::HumanHighOverlapLowAdemHigh:
        return "human>=high & bleu2<low & rouge_l<low & adem>high";
    case FailureSlice::HumanHighAdemLow:
        return "human>=high & adem<low";
    case FailureSlice::HumanHighAdemLowOverlapHigh:
        return "human>=high & adem<low & (bleu2>high | rouge_l>high)";
    }
    return "?";
}

FailureSlices failure_slice(std::span<const double> human, std::span<const double> bleu2,
                            std::span<const double> rouge, std::span<const double> adem, const FailureThresholds& th) {
    require_aligned(human.size(), bleu2.size(), "failure slice");
    require_aligned(human.size(), rouge.size(), "failure slice");
    require_aligned(human.size(), adem.size(), "failure slice");
    FailureSlices out;
    out.members.resize(kNumFailureSlices);
    out.total = human.size();
    auto add = [&](FailureSlice s, std::size_t i) { out.members[static_cast<int>(s)].push_back(i); };
    for (std::size_t i = 0; i < human.size(); ++i) {
        if (!(human[i] >= th.high)) continue;
        add(FailureSlice::HumanHigh, i);
        if (bleu2[i] < th.low && rouge[i] < th.low) {
            add(FailureSlice::HumanHighOverlapLow, i);
            if (adem[i] > th.high) add(FailureSlice::HumanHighOverlapLowAdemHigh, i);
        }
        if (adem[i] < th.low) {
            add(FailureSlice::HumanHighAdemLow, i);
            if (bleu2[i] > th.high || rouge[i] > th.high) add(FailureSlice::HumanHighAdemLowOverlapHigh, i);
        }
    }
    return out;
}

TestCorrelations correlate(std::span<const double> predicted, std::span<const double> human) {
    require_aligned(predicted.size(), human.size(), "correlation");
    TestCorrelations c;
    try {
        c.spearman = spearman(predicted, human);
        c.pearson = pearson(predicted, human);
    } catch (const Error&) {
        c = {};
    }
    return c;
}

std::vector<std::size_t> context_subset(std::span<const EncodedExample> train, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw UsageError("sweep fraction " + std::to_string(fraction) + " is outside (0, 1]");
    }
    std::vector<std::size_t> all(train.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    if (fraction == 1.0) return all;

    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    for (const auto& e : train) {
        if (seen.insert(e.context_id).second) ids.push_back(e.context_id);
    }
    const auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(ids.size())));
    if (k < 1) {
        throw ValidationError("sweep fraction " + std::to_string(fraction) + " selects no context out of " +
                              std::to_string(ids.size()));
    }
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::unordered_set<std::string> keep(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<std::size_t> out;
    for (auto i : all) {
        if (keep.count(train[i].context_id)) out.push_back(i);
    }
    return out;
}

std::vector<SweepRow> data_efficiency_sweep(std::span<const EncodedExample> train,
                                            std::span<const EncodedExample> validation,
                                            std::span<const EncodedExample> test, const SweepConfig& cfg) {
    if (cfg.seeds < 1) throw UsageError("sweep needs at least one seed");
    if (cfg.fractions.empty()) throw UsageError("sweep needs at least one fraction");
    const auto human = humans_of(test);
    const double nan = std::numeric_limits<double>::quiet_NaN();

    std::vector<SweepRow> rows;
    for (std::size_t f = 0; f < cfg.fractions.size(); ++f) {
        SweepRow row;
        row.fraction = cfg.fractions[f];
        double sums[4] = {0, 0, 0, 0};
        for (int s = 0; s < cfg.seeds; ++s) {
            AdemFitOptions fit = cfg.fit;
            if (s > 0) fit.train.seed = mix_seed(cfg.fit.train.seed, static_cast<std::uint64_t>(s));
            const auto idx = context_subset(train, row.fraction, mix_seed(fit.train.seed, 100 + f));
            const auto subset = gather(train, idx);
            if (s == 0) {
                row.train_examples = subset.size();
                std::set<std::string> ctx;
                for (const auto& e : subset) ctx.insert(e.context_id);
                row.train_contexts = ctx.size();
            }
            const auto result = fit_adem(subset, validation, fit);
            const auto c = correlate(score_encoded(result.params, test), human);
            sums[0] += c.spearman ? c.spearman->coefficient : nan;
            sums[1] += c.spearman ? c.spearman->p_value : nan;
            sums[2] += c.pearson ? c.pearson->coefficient : nan;
            sums[3] += c.pearson ? c.pearson->p_value : nan;
        }
        const double n = cfg.seeds;
        row.spearman = sums[0] / n;
        row.spearman_p = sums[1] / n;
        row.pearson = sums[2] / n;
        row.pearson_p = sums[3] / n;
        rows.push_back(row);
    }
    return rows;
}

LeaveOneOutResult leave_one_out_eval(std::span<const EncodedExample> train, std::span<const EncodedExample> validation,
                                     std::span<const EncodedExample> test, const AdemFitOptions& fit) {
    std::set<SourceModel> sources;
    for (const auto& e : train) sources.insert(e.source);
    for (const auto& e : test) sources.insert(e.source);
    if (sources.size() < 2) throw ValidationError("leave-one-out needs at least 2 source models");

    const auto human = humans_of(test);
    LeaveOneOutResult out;

    auto run = [&](std::string label, std::optional<SourceModel> held_out, std::vector<std::size_t> idx) {
        LeaveOneOutRow row;
        row.label = std::move(label);
        row.held_out = held_out;
        row.train_indices = std::move(idx);
        const auto subset = gather(train, std::span<const std::size_t>(row.train_indices));
        const auto result = fit_adem(subset, validation, fit);
        const auto pred = score_encoded(result.params, test);
        row.full_test = correlate(pred, human);
        if (held_out) {
            std::vector<double> p;
            std::vector<double> h;
            for (std::size_t i = 0; i < test.size(); ++i) {
                if (test[i].source == *held_out) {
                    p.push_back(pred[i]);
                    h.push_back(human[i]);
                }
            }
            row.held_out_test_count = p.size();
            row.held_out_test = correlate(p, h);
        }
        out.rows.push_back(std::move(row));
    };

    std::vector<std::size_t> all(train.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    run("all", std::nullopt, all);

    std::size_t largest = 0;
    for (auto src : sources) {
        std::vector<std::size_t> idx;
        std::size_t removed = 0;
        for (auto i : all) {
            if (train[i].source == src) {
                ++removed;
            } else {
                idx.push_back(i);
            }
        }
        if (removed == 0) {
            out.warnings.push_back("source model " + std::string(to_string(src)) +
                                   " has no training examples; leave-one-out run skipped");
            continue;
        }
        if (idx.empty()) {
            out.warnings.push_back("holding out " + std::string(to_string(src)) +
                                   " leaves no training data; leave-one-out run skipped");
            continue;
        }
        largest = std::max(largest, idx.size());
        run("without " + std::string(to_string(src)), src, std::move(idx));
    }

    if (largest > 0) {
        std::vector<std::size_t> idx = all;
        std::mt19937_64 rng(mix_seed(fit.train.seed, 31));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(largest);
        std::sort(idx.begin(), idx.end());
        run("random control", std::nullopt, std::move(idx));
    }
    return out;
}

} // namespace dlev
