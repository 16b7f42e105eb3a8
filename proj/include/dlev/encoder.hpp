#pragma once

#include "dlev/checkpoint.hpp"
#include "dlev/corpus.hpp"
#include "dlev/lstm.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dlev {

struct EncoderConfig {
    int vocab_size = 0;
    int embed_dim = 32;
    int utterance_hidden = 64;
    // Output dimension d of every embedding.
    int context_hidden = 64;
    bool layer_norm = true;

    void validate() const;
};

// Token embeddings feeding an utterance-level LSTM whose final states feed a
// context-level LSTM. The context-level hidden size is the embedding dimension.
struct HierEncoderParams {
    MatrixXd embedding; // vocab x embed_dim
    LstmCellParams utterance;
    LstmCellParams context;

    int vocab_size() const { return static_cast<int>(embedding.rows()); }
    int output_dim() const { return context.hidden(); }
    EncoderConfig config() const;

    static HierEncoderParams init(const EncoderConfig& cfg, std::uint64_t seed);
    // Same shapes, all tensors zero (gradient accumulator).
    HierEncoderParams zeros_like() const;

    void validate() const;
    std::vector<NamedTensor> tensors();

    void save(Checkpoint& ckpt) const;
    static HierEncoderParams load(const Checkpoint& ckpt);
};

struct EmbeddingTriple {
    VectorXd context;
    VectorXd reference;
    VectorXd response;
};

VectorXd encode_utterance(std::span<const int> tokens, const HierEncoderParams& params);
VectorXd encode_context(std::span<const VectorXd> utterance_vectors, const HierEncoderParams& params);

// Context from its full utterance sequence; each response as a one-utterance context.
EmbeddingTriple encode_triple(const EvalExample& example, const HierEncoderParams& params);

// Cached forward passes for backpropagation.
VectorXd forward_utterance(std::span<const int> tokens, const HierEncoderParams& params, SequenceCache& cache);
void backward_utterance(std::span<const int> tokens, const SequenceCache& cache, const VectorXd& d_output,
                        const HierEncoderParams& params, HierEncoderParams& grads);

struct ContextForward {
    std::vector<SequenceCache> utterance_caches;
    std::vector<VectorXd> utterance_vectors;
    SequenceCache context_cache;
    std::vector<VectorXd> context_states; // hidden state after each utterance
};

ContextForward forward_context(std::span<const std::vector<int>> utterances, const HierEncoderParams& params);

// d_states[k] is the gradient on the context state after utterance k; extra
// per-utterance-vector gradients may be supplied in d_utterance (same length or empty).
void backward_context(std::span<const std::vector<int>> utterances, const ContextForward& fwd,
                      std::span<const VectorXd> d_states, std::span<const VectorXd> d_utterance,
                      const HierEncoderParams& params, HierEncoderParams& grads);

} // namespace dlev
