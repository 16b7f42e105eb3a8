#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace dlev {

using TokenSeq = std::vector<std::string>;

// n-gram -> occurrence count, for a single order n.
using NGramCounts = std::map<std::vector<std::string>, int>;

NGramCounts count_ngrams(std::span<const std::string> tokens, int n);

enum class BleuSmoothing { None, AddEpsilon };

struct BleuConfig {
    int max_order = 4;
    // Empty means uniform 1/max_order.
    std::vector<double> weights;
    BleuSmoothing smoothing = BleuSmoothing::AddEpsilon;
    double epsilon = 1e-9;

    std::vector<double> resolved_weights() const;
    void validate() const;
};

// Per-sentence statistics; summing them over a corpus gives corpus BLEU.
struct BleuStats {
    std::vector<long> matches;   // clipped n-gram matches, per order
    std::vector<long> totals;    // candidate n-grams, per order
    long candidate_length = 0;
    long reference_length = 0;   // closest reference length

    BleuStats& operator+=(const BleuStats& other);
};

BleuStats bleu_stats(std::span<const std::string> candidate, std::span<const TokenSeq> references, int max_order);
double bleu_from_stats(const BleuStats& stats, const BleuConfig& cfg);

// Sentence-level BLEU-N with brevity penalty min(1, exp(1 - ref/cand)).
double bleu_n(std::span<const std::string> candidate, std::span<const TokenSeq> references, const BleuConfig& cfg);
double bleu_n(std::span<const std::string> candidate, std::span<const std::string> reference, const BleuConfig& cfg);

double corpus_bleu(std::span<const TokenSeq> candidates, std::span<const std::vector<TokenSeq>> references,
                   const BleuConfig& cfg);

struct RougeConfig {
    double beta = 1.2;
    void validate() const;
};

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

double rouge_l(std::span<const std::string> candidate, std::span<const TokenSeq> references, const RougeConfig& cfg);
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference, const RougeConfig& cfg);

enum class MeteorStage { Exact, Stem };

struct MeteorConfig {
    double alpha = 0.9;
    double gamma = 0.5;
    double theta = 3.0;
    std::vector<MeteorStage> stages{MeteorStage::Exact, MeteorStage::Stem};
    // Search budget per stage; the best alignment found is kept when exceeded.
    long max_search_nodes = 1'000'000;

    void validate() const;
};

// Suffix stripper used by the stem stage: removes one of "ing", "ed", "es", "s"
// when at least two characters remain.
std::string meteor_stem(const std::string& word);

struct MeteorAlignment {
    // (candidate index, reference index), sorted by candidate index.
    std::vector<std::pair<int, int>> matches;
    int chunks = 0;
};

MeteorAlignment meteor_align(std::span<const std::string> candidate, std::span<const std::string> reference,
                             const MeteorConfig& cfg);

double meteor(std::span<const std::string> candidate, std::span<const std::string> reference, const MeteorConfig& cfg);

} // namespace dlev
