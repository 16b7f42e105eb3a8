#pragma once

#include "dlev/adem.hpp"
#include "dlev/corpus.hpp"
#include "dlev/encoder.hpp"

#include <cstdint>
#include <optional>
#include <string_view>

namespace dlev {

// realizable: human = affine(c'M*r̂ + r'N*r̂) + N(0, noise_sd), computed on the
//   PCA-projected embeddings of a freshly initialized encoder; the affine map
//   sends the raw minimum to 1 and the maximum to 5.
// noisy: integer human scores drawn independently of the text.
// length-biased: integer human scores whose distribution shifts with the
//   model-response length bin; length-score Pearson near length_correlation.
enum class SynthVariant { Realizable, Noisy, LengthBiased };

std::string_view to_string(SynthVariant v);
SynthVariant parse_synth_variant(std::string_view s); // throws UsageError

struct SynthConfig {
    SynthVariant variant = SynthVariant::Realizable;
    int contexts = 700;
    int sources = 4;         // responses per context, tagged TFIDF, DE, HRED, HUMAN in that order
    double noise_sd = 0.1;
    int pca_dim = 50;
    int bpe_merges = 300;
    int vocab_size = 2000;
    EncoderConfig encoder;   // vocab_size is overwritten by the learned vocabulary
    double length_slope = 0.3; // score shift per length bin in the length-biased variant
    // Realizable rule uses M* = I + p G / sqrt(n), N* likewise, G standard
    // normal; p = 0 gives c'r̂ + r'r̂.
    double rule_perturbation = 0.0;

    void validate() const;
};

struct SynthOutput {
    Dataset dataset;
    // Present for the realizable and noisy variants.
    std::optional<BpeMerges> merges;
    std::optional<Vocabulary> vocab;
    std::optional<HierEncoderParams> encoder;
    std::optional<PcaProjection> pca;
};

SynthOutput generate_synth(const SynthConfig& cfg, std::uint64_t seed);

// Rounds every parameter through float32, matching what a checkpoint stores.
void round_to_float(HierEncoderParams& params);

} // namespace dlev
