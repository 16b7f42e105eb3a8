#pragma once

#include "dlev/adem.hpp"
#include "dlev/corpus.hpp"
#include "dlev/stats.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dlev {

struct ModelSummary {
    SourceModel source = SourceModel::OTHER;
    std::size_t count = 0;
    double mean_human = 0.0;
    double mean_metric = 0.0;
};
using SystemSummary = std::vector<ModelSummary>; // ordered by SourceModel

struct SystemCorrelation {
    CorrelationResult correlation;
    SystemSummary summary;
};

// Pearson across per-model mean scores; needs at least 3 distinct models.
SystemCorrelation system_level_correlation(std::span<const double> human, std::span<const double> metric,
                                           std::span<const SourceModel> sources);
SystemSummary summarize_by_model(std::span<const double> human, std::span<const double> metric,
                                 std::span<const SourceModel> sources);

struct NormalizedScores {
    std::vector<double> pre_clip;   // affine image, mean and population variance of the human scores
    std::vector<double> normalized; // clipped to [1,5], raw 0 -> 1
};

NormalizedScores normalize_scores(std::span<const double> metric, std::span<const double> human);

// |#words(reference) - #words(model response)|
int delta_words(const EvalExample& ex);

struct LengthBiasReport {
    int threshold = 6;
    WelchResult test; // a = (delta_w <= threshold), b = (delta_w > threshold)
    bool length_biased = false; // significant at 0.05 and favouring the small-delta group
};

LengthBiasReport length_bias_report(std::span<const int> delta_w, std::span<const double> scores, int threshold = 6);

struct FailureThresholds {
    double high = 4.0;
    double low = 2.0;
};

enum class FailureSlice {
    HumanHigh,             // human >= high
    HumanHighOverlapLow,   // ... and BLEU-2 < low and ROUGE-L < low
    HumanHighOverlapLowAdemHigh, // ... and ADEM > high
    HumanHighAdemLow,      // human >= high and ADEM < low
    HumanHighAdemLowOverlapHigh, // ... and (BLEU-2 > high or ROUGE-L > high)
};
inline constexpr int kNumFailureSlices = 5;

std::string_view describe(FailureSlice s);

struct FailureSlices {
    std::vector<std::vector<std::size_t>> members; // per FailureSlice, indices in input order
    std::size_t total = 0;

    const std::vector<std::size_t>& operator[](FailureSlice s) const { return members[static_cast<int>(s)]; }
};

// Score columns are normalized scores, aligned with human.
FailureSlices failure_slice(std::span<const double> human, std::span<const double> bleu2,
                            std::span<const double> rouge, std::span<const double> adem,
                            const FailureThresholds& th = {});

struct TestCorrelations {
    std::optional<CorrelationResult> spearman;
    std::optional<CorrelationResult> pearson;
};

// Correlation of predictions with human scores; empty where undefined.
TestCorrelations correlate(std::span<const double> predicted, std::span<const double> human);

struct SweepConfig {
    AdemFitOptions fit;
    std::vector<double> fractions{1.0, 0.75, 0.5, 0.25, 0.1, 0.05};
    int seeds = 1;
};

struct SweepRow {
    double fraction = 1.0;
    std::size_t train_contexts = 0;
    std::size_t train_examples = 0;
    // Coefficients and p-values averaged over seeds; NaN where undefined for any seed.
    double spearman = 0.0;
    double spearman_p = 1.0;
    double pearson = 0.0;
    double pearson_p = 1.0;
};

// Context-granular random subsets of the training set, in input order.
// Seed index 0 of fraction 1.0 is exactly fit_adem on the full set.
std::vector<std::size_t> context_subset(std::span<const EncodedExample> train, double fraction, std::uint64_t seed);

std::vector<SweepRow> data_efficiency_sweep(std::span<const EncodedExample> train,
                                            std::span<const EncodedExample> validation,
                                            std::span<const EncodedExample> test, const SweepConfig& cfg);

struct LeaveOneOutRow {
    std::string label;                 // "all", "without <model>", "random control"
    std::optional<SourceModel> held_out;
    std::vector<std::size_t> train_indices;
    TestCorrelations full_test;
    std::size_t held_out_test_count = 0;
    TestCorrelations held_out_test;
};

struct LeaveOneOutResult {
    std::vector<LeaveOneOutRow> rows;
    std::vector<std::string> warnings;
};

// One run per source model without its training responses, plus a control
// dropping random examples down to the largest leave-one-out training size.
LeaveOneOutResult leave_one_out_eval(std::span<const EncodedExample> train, std::span<const EncodedExample> validation,
                                     std::span<const EncodedExample> test, const AdemFitOptions& fit);

} // namespace dlev
