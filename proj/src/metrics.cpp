#include "dlev/metrics.hpp"

#include "dlev/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace dlev {

NGramCounts count_ngrams(std::span<const std::string> tokens, int n) {
    NGramCounts counts;
    if (n < 1) return counts;
    const auto len = static_cast<int>(tokens.size());
    for (int i = 0; i + n <= len; ++i) {
        ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
    }
    return counts;
}

// ---------------------------------------------------------------------------
// BLEU

std::vector<double> BleuConfig::resolved_weights() const {
    if (!weights.empty()) return weights;
    return std::vector<double>(static_cast<std::size_t>(max_order), 1.0 / max_order);
}

void BleuConfig::validate() const {
    if (max_order < 1) throw UsageError("BLEU max_order must be >= 1");
    if (!weights.empty()) {
        if (static_cast<int>(weights.size()) != max_order) {
            throw UsageError("BLEU weights must have max_order entries");
        }
        double sum = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw UsageError("BLEU weights must be non-negative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw UsageError("BLEU weights must sum to 1");
    }
    if (smoothing == BleuSmoothing::AddEpsilon && !(epsilon > 0.0)) {
        throw UsageError("BLEU smoothing epsilon must be positive");
    }
}

BleuStats& BleuStats::operator+=(const BleuStats& other) {
    if (matches.size() < other.matches.size()) {
        matches.resize(other.matches.size(), 0);
        totals.resize(other.totals.size(), 0);
    }
    for (std::size_t n = 0; n < other.matches.size(); ++n) {
        matches[n] += other.matches[n];
        totals[n] += other.totals[n];
    }
    candidate_length += other.candidate_length;
    reference_length += other.reference_length;
    return *this;
}

BleuStats bleu_stats(std::span<const std::string> candidate, std::span<const TokenSeq> references, int max_order) {
    if (candidate.empty()) throw ValidationError("BLEU candidate is empty");
    if (references.empty()) throw ValidationError("BLEU needs at least one reference");

    BleuStats s;
    s.matches.assign(static_cast<std::size_t>(max_order), 0);
    s.totals.assign(static_cast<std::size_t>(max_order), 0);
    s.candidate_length = static_cast<long>(candidate.size());

    // Closest reference length; ties go to the shorter reference.
    long best_diff = std::numeric_limits<long>::max();
    for (const auto& ref : references) {
        const auto len = static_cast<long>(ref.size());
        const long diff = std::abs(len - s.candidate_length);
        if (diff < best_diff || (diff == best_diff && len < s.reference_length)) {
            best_diff = diff;
            s.reference_length = len;
        }
    }

    for (int n = 1; n <= max_order; ++n) {
        const auto cand = count_ngrams(candidate, n);
        NGramCounts max_ref;
        for (const auto& ref : references) {
            for (const auto& [gram, c] : count_ngrams(ref, n)) {
                auto& slot = max_ref[gram];
                slot = std::max(slot, c);
            }
        }
        long matched = 0;
        long total = 0;
        for (const auto& [gram, c] : cand) {
            total += c;
            auto it = max_ref.find(gram);
            if (it != max_ref.end()) matched += std::min(c, it->second);
        }
        s.matches[static_cast<std::size_t>(n - 1)] = matched;
        s.totals[static_cast<std::size_t>(n - 1)] = total;
    }
    return s;
}

double bleu_from_stats(const BleuStats& stats, const BleuConfig& cfg) {
    cfg.validate();
    if (stats.candidate_length == 0) return 0.0;
    const auto weights = cfg.resolved_weights();

    double log_sum = 0.0;
    for (int n = 0; n < cfg.max_order; ++n) {
        const double w = weights[static_cast<std::size_t>(n)];
        if (w == 0.0) continue;
        const auto idx = static_cast<std::size_t>(n);
        const long matched = idx < stats.matches.size() ? stats.matches[idx] : 0;
        const long total = idx < stats.totals.size() ? stats.totals[idx] : 0;
        double p = 0.0;
        if (matched > 0 && total > 0) {
            p = static_cast<double>(matched) / static_cast<double>(total);
        } else if (cfg.smoothing == BleuSmoothing::AddEpsilon) {
            p = cfg.epsilon;
        } else {
            return 0.0;
        }
        log_sum += w * std::log(p);
    }
    const double ratio = static_cast<double>(stats.reference_length) / static_cast<double>(stats.candidate_length);
    const double brevity = std::min(1.0, std::exp(1.0 - ratio));
    return brevity * std::exp(log_sum);
}

double bleu_n(std::span<const std::string> candidate, std::span<const TokenSeq> references, const BleuConfig& cfg) {
    cfg.validate();
    return bleu_from_stats(bleu_stats(candidate, references, cfg.max_order), cfg);
}

double bleu_n(std::span<const std::string> candidate, std::span<const std::string> reference, const BleuConfig& cfg) {
    const TokenSeq ref(reference.begin(), reference.end());
    return bleu_n(candidate, std::span<const TokenSeq>(&ref, 1), cfg);
}

double corpus_bleu(std::span<const TokenSeq> candidates, std::span<const std::vector<TokenSeq>> references,
                   const BleuConfig& cfg) {
    cfg.validate();
    if (candidates.size() != references.size()) {
        throw ValidationError("corpus BLEU needs one reference set per candidate");
    }
    BleuStats total;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        total += bleu_stats(candidates[i], references[i], cfg.max_order);
    }
    return bleu_from_stats(total, cfg);
}

// ---------------------------------------------------------------------------
// ROUGE-L

void RougeConfig::validate() const {
    if (!(beta > 0.0)) throw UsageError("ROUGE beta must be positive");
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(std::span<const std::string> candidate, std::span<const TokenSeq> references, const RougeConfig& cfg) {
    cfg.validate();
    if (candidate.empty()) throw ValidationError("ROUGE-L candidate is empty");
    if (references.empty()) throw ValidationError("ROUGE-L needs at least one reference");

    double recall = 0.0;
    double precision = 0.0;
    for (const auto& ref : references) {
        if (ref.empty()) throw ValidationError("ROUGE-L reference is empty");
        const auto l = static_cast<double>(lcs_length(candidate, ref));
        recall = std::max(recall, l / static_cast<double>(ref.size()));
        precision = std::max(precision, l / static_cast<double>(candidate.size()));
    }
    if (recall == 0.0 && precision == 0.0) return 0.0;
    const double b2 = cfg.beta * cfg.beta;
    return (1.0 + b2) * recall * precision / (recall + b2 * precision);
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference, const RougeConfig& cfg) {
    const TokenSeq ref(reference.begin(), reference.end());
    return rouge_l(candidate, std::span<const TokenSeq>(&ref, 1), cfg);
}

// ---------------------------------------------------------------------------
// METEOR

void MeteorConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("METEOR alpha must lie in [0,1]");
    if (!(gamma >= 0.0)) throw UsageError("METEOR gamma must be >= 0");
    if (!(theta >= 0.0)) throw UsageError("METEOR theta must be >= 0");
    if (max_search_nodes < 1) throw UsageError("METEOR search budget must be positive");
}

std::string meteor_stem(const std::string& word) {
    static const char* const suffixes[] = {"ing", "ed", "es", "s"};
    for (const char* suf : suffixes) {
        const std::string_view s(suf);
        if (word.size() >= s.size() + 2 && word.compare(word.size() - s.size(), s.size(), s) == 0) {
            return word.substr(0, word.size() - s.size());
        }
    }
    return word;
}

namespace {

int count_chunks(std::vector<std::pair<int, int>> matches) {
    if (matches.empty()) return 0;
    std::sort(matches.begin(), matches.end());
    int chunks = 1;
    for (std::size_t k = 1; k < matches.size(); ++k) {
        const bool adjacent = matches[k].first == matches[k - 1].first + 1 && matches[k].second == matches[k - 1].second + 1;
        if (!adjacent) ++chunks;
    }
    return chunks;
}

// One matcher stage: among alignments of still-unmatched tokens with equal
// keys, find one with the most matches, then the fewest chunks overall.
class StageSearch {
  public:
    StageSearch(std::vector<int> cand_keys, std::vector<int> ref_keys, std::vector<int> fixed_ref_of_cand,
                long budget)
        : cand_keys_(std::move(cand_keys)), ref_keys_(std::move(ref_keys)), assigned_(std::move(fixed_ref_of_cand)),
          budget_(budget) {
        fixed_.resize(assigned_.size());
        ref_used_.assign(ref_keys_.size(), false);
        for (std::size_t i = 0; i < assigned_.size(); ++i) {
            fixed_[i] = assigned_[i] >= 0;
            if (fixed_[i]) ref_used_[static_cast<std::size_t>(assigned_[i])] = true;
        }
        // Remaining demand per key: how many new matches the maximum requires.
        std::unordered_map<int, int> cand_free;
        std::unordered_map<int, int> ref_free;
        for (std::size_t i = 0; i < cand_keys_.size(); ++i) {
            if (!fixed_[i] && cand_keys_[i] >= 0) ++cand_free[cand_keys_[i]];
        }
        for (std::size_t j = 0; j < ref_keys_.size(); ++j) {
            if (!ref_used_[j] && ref_keys_[j] >= 0) ++ref_free[ref_keys_[j]];
        }
        for (const auto& [key, c] : cand_free) {
            auto it = ref_free.find(key);
            need_[key] = std::min(c, it == ref_free.end() ? 0 : it->second);
        }
        cand_left_ = std::move(cand_free);
    }

    std::vector<int> run() {
        best_chunks_ = std::numeric_limits<int>::max();
        best_ = assigned_;
        dfs(0, -1, -1, 0);
        return best_;
    }

  private:
    void dfs(std::size_t i, int prev_c, int prev_r, int chunks) {
        if (nodes_++ > budget_ && best_chunks_ != std::numeric_limits<int>::max()) return;
        if (chunks >= best_chunks_) return;
        if (i == cand_keys_.size()) {
            best_chunks_ = chunks;
            best_ = assigned_;
            return;
        }
        auto extend = [&](int r) {
            const bool continues = prev_c == static_cast<int>(i) - 1 && prev_r >= 0 && r == prev_r + 1;
            return chunks + (prev_c < 0 || !continues ? 1 : 0);
        };

        if (fixed_[i]) {
            const int r = assigned_[i];
            dfs(i + 1, static_cast<int>(i), r, extend(r));
            return;
        }
        const int key = cand_keys_[i];
        if (key < 0 || need_[key] == 0) {
            dfs(i + 1, prev_c, prev_r, chunks);
            return;
        }

        // Try the reference slot that continues the current chunk first.
        std::vector<int> options;
        for (std::size_t j = 0; j < ref_keys_.size(); ++j) {
            if (!ref_used_[j] && ref_keys_[j] == key) options.push_back(static_cast<int>(j));
        }
        std::stable_partition(options.begin(), options.end(), [&](int r) {
            return prev_c == static_cast<int>(i) - 1 && r == prev_r + 1;
        });

        --cand_left_[key];
        for (int r : options) {
            ref_used_[static_cast<std::size_t>(r)] = true;
            assigned_[i] = r;
            --need_[key];
            dfs(i + 1, static_cast<int>(i), r, extend(r));
            ++need_[key];
            assigned_[i] = -1;
            ref_used_[static_cast<std::size_t>(r)] = false;
        }
        // Skipping is allowed only if the later candidates can still meet the demand.
        if (cand_left_[key] >= need_[key]) dfs(i + 1, prev_c, prev_r, chunks);
        ++cand_left_[key];
    }

    std::vector<int> cand_keys_;
    std::vector<int> ref_keys_;
    std::vector<int> assigned_;
    std::vector<bool> fixed_;
    std::vector<bool> ref_used_;
    std::unordered_map<int, int> need_;
    std::unordered_map<int, int> cand_left_;
    std::vector<int> best_;
    int best_chunks_ = 0;
    long budget_;
    long nodes_ = 0;
};

} // namespace

MeteorAlignment meteor_align(std::span<const std::string> candidate, std::span<const std::string> reference,
                             const MeteorConfig& cfg) {
    cfg.validate();
    std::vector<int> ref_of_cand(candidate.size(), -1);

    for (MeteorStage stage : cfg.stages) {
        std::unordered_map<std::string, int> key_ids;
        auto key_of = [&](const std::string& w) {
            const std::string k = stage == MeteorStage::Exact ? w : meteor_stem(w);
            return key_ids.emplace(k, static_cast<int>(key_ids.size())).first->second;
        };
        std::vector<int> cand_keys;
        std::vector<int> ref_keys;
        for (const auto& w : candidate) cand_keys.push_back(key_of(w));
        for (const auto& w : reference) ref_keys.push_back(key_of(w));
        ref_of_cand = StageSearch(std::move(cand_keys), std::move(ref_keys), ref_of_cand, cfg.max_search_nodes).run();
    }

    MeteorAlignment out;
    for (std::size_t i = 0; i < ref_of_cand.size(); ++i) {
        if (ref_of_cand[i] >= 0) out.matches.emplace_back(static_cast<int>(i), ref_of_cand[i]);
    }
    out.chunks = count_chunks(out.matches);
    return out;
}

double meteor(std::span<const std::string> candidate, std::span<const std::string> reference, const MeteorConfig& cfg) {
    if (candidate.empty() || reference.empty()) throw ValidationError("METEOR inputs must be non-empty");
    const auto alignment = meteor_align(candidate, reference, cfg);
    const auto m = static_cast<double>(alignment.matches.size());
    if (m == 0.0) return 0.0;

    const double precision = m / static_cast<double>(candidate.size());
    const double recall = m / static_cast<double>(reference.size());
    const double f_mean = precision * recall / (cfg.alpha * precision + (1.0 - cfg.alpha) * recall);
    const double penalty = cfg.gamma * std::pow(static_cast<double>(alignment.chunks) / m, cfg.theta);
    return (1.0 - penalty) * f_mean;
}

} // namespace dlev
