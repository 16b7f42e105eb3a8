#include "dlev/synth.hpp"

#include "dlev/errors.hpp"
#include "dlev/seed.hpp"
#include "dlev/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

namespace dlev {

std::string_view to_string(SynthVariant v) {
    switch (v) {
    case SynthVariant::Realizable:
        return "realizable";
    case SynthVariant::Noisy:
        return "noisy";
    case SynthVariant::LengthBiased:
        return "length-biased";
    }
    return "?";
}

SynthVariant parse_synth_variant(std::string_view s) {
    if (s == "realizable") return SynthVariant::Realizable;
    if (s == "noisy") return SynthVariant::Noisy;
    if (s == "length-biased") return SynthVariant::LengthBiased;
    throw UsageError("unknown synth variant '" + std::string(s) + "' (expected realizable, noisy or length-biased)");
}

void SynthConfig::validate() const {
    if (contexts < 3) throw UsageError("synth needs at least 3 contexts");
    if (sources < 1 || sources > 4) throw UsageError("synth sources must be between 1 and 4");
    if (!(noise_sd >= 0.0)) throw UsageError("synth noise_sd must be >= 0");
    if (pca_dim < 1) throw UsageError("synth pca_dim must be >= 1");
    if (bpe_merges < 0) throw UsageError("synth bpe_merges must be >= 0");
    if (!(rule_perturbation >= 0.0)) throw UsageError("synth rule_perturbation must be >= 0");
}

void round_to_float(HierEncoderParams& params) {
    for (auto& t : params.tensors()) {
        for (double& v : t.values) v = static_cast<double>(static_cast<float>(v));
    }
}

namespace {

class WordSource {
  public:
    explicit WordSource(std::mt19937_64& rng) : rng_(rng) {
        static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "ch"};
        static const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
        std::uniform_int_distribution<int> on(0, 15);
        std::uniform_int_distribution<int> vo(0, 6);
        std::uniform_int_distribution<int> syl(1, 3);
        std::set<std::string> seen;
        while (words_.size() < 400) {
            std::string w;
            for (int k = syl(rng_); k > 0; --k) {
                w += onsets[on(rng_)];
                w += vowels[vo(rng_)];
            }
            if (seen.insert(w).second) words_.push_back(w);
        }
    }

    // Skewed toward low ranks, like word frequencies.
    std::string sentence(int length) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::string s;
        for (int i = 0; i < length; ++i) {
            const auto rank = static_cast<std::size_t>(std::pow(u(rng_), 2.0) * static_cast<double>(words_.size()));
            if (i) s += ' ';
            s += words_[std::min(rank, words_.size() - 1)];
        }
        return s;
    }

  private:
    std::mt19937_64& rng_;
    std::vector<std::string> words_;
};

constexpr SourceModel kSources[] = {SourceModel::TFIDF, SourceModel::DE, SourceModel::HRED, SourceModel::HUMAN};

// Response length for the length-biased variant: uniform bin, then uniform within it.
int biased_length(int bin, std::mt19937_64& rng) {
    static const int lo[] = {1, 6, 11, 21};
    static const int hi[] = {5, 10, 20, 30};
    return std::uniform_int_distribution<int>(lo[bin], hi[bin])(rng);
}

} // namespace

SynthOutput generate_synth(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 text_rng(mix_seed(seed, 1));
    std::mt19937_64 score_rng(mix_seed(seed, 2));
    WordSource words(text_rng);
    std::uniform_int_distribution<int> turns(1, 3);
    std::uniform_int_distribution<int> turn_len(3, 10);
    std::uniform_int_distribution<int> ref_len(2, 12);
    std::uniform_int_distribution<int> resp_len(1, 15);
    std::uniform_int_distribution<int> bin_dist(0, 3);
    std::uniform_int_distribution<int> level(1, 5);
    std::normal_distribution<double> gauss(0.0, 1.0);

    SynthOutput out;
    for (int c = 0; c < cfg.contexts; ++c) {
        char id[32];
        std::snprintf(id, sizeof id, "ctx-%05d", c);
        Context ctx{id, {}};
        for (int k = turns(text_rng); k > 0; --k) ctx.utterances.push_back({words.sentence(turn_len(text_rng)), {}});
        const Utterance reference{words.sentence(ref_len(text_rng)), {}};
        for (int s = 0; s < cfg.sources; ++s) {
            EvalExample ex;
            ex.context = ctx;
            ex.reference_response = reference;
            ex.source_model = kSources[s];
            if (cfg.variant == SynthVariant::LengthBiased) {
                const int bin = bin_dist(text_rng);
                ex.model_response = {words.sentence(biased_length(bin, text_rng)), {}};
                const double mu = 3.0 + cfg.length_slope * (bin - 1.5);
                ex.human_score = std::clamp(std::round(mu + 1.1 * gauss(score_rng)), 1.0, 5.0);
            } else {
                ex.model_response = {words.sentence(resp_len(text_rng)), {}};
                ex.human_score = level(score_rng);
            }
            out.dataset.push_back(std::move(ex));
        }
    }
    if (cfg.variant == SynthVariant::LengthBiased) return out;

    const auto texts = dataset_texts(out.dataset);
    auto merges = learn_bpe(texts, cfg.bpe_merges);
    auto vocab = build_vocab(texts, merges, cfg.vocab_size);
    const Tokenizer tok(merges, vocab);
    tokenize_dataset(out.dataset, tok);

    EncoderConfig ecfg = cfg.encoder;
    ecfg.vocab_size = vocab.size();
    auto encoder = HierEncoderParams::init(ecfg, mix_seed(seed, 3));
    round_to_float(encoder);

    if (cfg.variant == SynthVariant::Realizable) {
        auto pca = fit_pca_on_dataset(out.dataset, encoder, cfg.pca_dim);
        const auto enc = encode_examples(out.dataset, encoder, &pca);
        const int n = cfg.pca_dim;
        MatrixXd M = MatrixXd::Identity(n, n);
        MatrixXd N = MatrixXd::Identity(n, n);
        if (cfg.rule_perturbation != 0.0) {
            std::mt19937_64 rule_rng(mix_seed(seed, 4));
            const double scale = cfg.rule_perturbation / std::sqrt(static_cast<double>(n));
            for (auto* A : {&M, &N}) {
                for (int j = 0; j < n; ++j) {
                    for (int i = 0; i < n; ++i) (*A)(i, j) += scale * gauss(rule_rng);
                }
            }
        }
        std::vector<double> raw;
        raw.reserve(enc.size());
        for (const auto& e : enc) raw.push_back(raw_score(M, N, e.triple));
        // The same map init_alpha_beta derives, so identity M, N with frozen
        // calibration already fits up to noise.
        const auto calib = init_alpha_beta(raw);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const double y = (raw[i] - calib.alpha) / calib.beta + cfg.noise_sd * gauss(score_rng);
            out.dataset[i].human_score = std::clamp(y, 1.0, 5.0);
        }
        out.pca = std::move(pca);
    }
    out.merges = std::move(merges);
    out.vocab = std::move(vocab);
    out.encoder = std::move(encoder);
    return out;
}

} // namespace dlev
