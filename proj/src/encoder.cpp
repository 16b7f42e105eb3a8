#include "dlev/encoder.hpp"

#include "dlev/errors.hpp"

#include <random>

namespace dlev {

namespace {

void save_cell(Checkpoint& ckpt, const std::string& prefix, const LstmCellParams& cell) {
    ckpt.put_matrix(prefix + ".W", cell.W);
    ckpt.put_matrix(prefix + ".U", cell.U);
    ckpt.put_vector(prefix + ".b", cell.b);
    ckpt.put_vector(prefix + ".ln_gain", cell.ln_gain);
    ckpt.put_vector(prefix + ".ln_shift", cell.ln_shift);
    ckpt.put_scalar(prefix + ".layer_norm", cell.layer_norm ? 1.0 : 0.0);
}

LstmCellParams load_cell(const Checkpoint& ckpt, const std::string& prefix) {
    LstmCellParams cell;
    cell.W = ckpt.matrix(prefix + ".W");
    cell.U = ckpt.matrix(prefix + ".U");
    cell.b = ckpt.vector(prefix + ".b");
    cell.ln_gain = ckpt.vector(prefix + ".ln_gain");
    cell.ln_shift = ckpt.vector(prefix + ".ln_shift");
    cell.layer_norm = ckpt.scalar_or(prefix + ".layer_norm", 1.0) != 0.0;
    cell.validate();
    return cell;
}

std::vector<VectorXd> embed(std::span<const int> tokens, const HierEncoderParams& params) {
    if (tokens.empty()) throw ValidationError("cannot encode an empty token sequence");
    std::vector<VectorXd> inputs;
    inputs.reserve(tokens.size());
    for (int t : tokens) {
        if (t < 0 || t >= params.vocab_size()) {
            throw ValidationError("token id " + std::to_string(t) + " outside vocabulary of size " +
                                  std::to_string(params.vocab_size()));
        }
        inputs.emplace_back(params.embedding.row(t).transpose());
    }
    return inputs;
}

const std::vector<int>& tokens_of(const Utterance& u) {
    if (!u.tokens) throw ValidationError("utterance '" + u.text + "' is not tokenized");
    return *u.tokens;
}

} // namespace

void EncoderConfig::validate() const {
    if (vocab_size <= Vocabulary::kNumReserved) throw UsageError("encoder vocab_size must exceed the reserved tokens");
    if (embed_dim < 1 || utterance_hidden < 1 || context_hidden < 1) {
        throw UsageError("encoder dimensions must be positive");
    }
}

EncoderConfig HierEncoderParams::config() const {
    return EncoderConfig{vocab_size(), static_cast<int>(embedding.cols()), utterance.hidden(), context.hidden(),
                         utterance.layer_norm};
}

HierEncoderParams HierEncoderParams::init(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    HierEncoderParams p;
    p.embedding.resize(cfg.vocab_size, cfg.embed_dim);
    for (Eigen::Index c = 0; c < p.embedding.cols(); ++c) {
        for (Eigen::Index r = 0; r < p.embedding.rows(); ++r) p.embedding(r, c) = dist(rng);
    }
    p.utterance = LstmCellParams::init(cfg.embed_dim, cfg.utterance_hidden, cfg.layer_norm, rng);
    p.context = LstmCellParams::init(cfg.utterance_hidden, cfg.context_hidden, cfg.layer_norm, rng);
    return p;
}

HierEncoderParams HierEncoderParams::zeros_like() const {
    HierEncoderParams g;
    g.embedding = MatrixXd::Zero(embedding.rows(), embedding.cols());
    g.utterance = utterance.zeros_like();
    g.context = context.zeros_like();
    return g;
}

void HierEncoderParams::validate() const {
    utterance.validate();
    context.validate();
    if (utterance.input() != embedding.cols()) throw ValidationError("utterance cell input != embedding dimension");
    if (context.input() != utterance.hidden()) {
        throw ValidationError("context cell input must equal the utterance hidden size");
    }
}

std::vector<NamedTensor> HierEncoderParams::tensors() {
    std::vector<NamedTensor> out{{"encoder.embedding", as_span(embedding)}};
    for (auto& t : utterance.tensors("encoder.utterance")) out.push_back(std::move(t));
    for (auto& t : context.tensors("encoder.context")) out.push_back(std::move(t));
    return out;
}

void HierEncoderParams::save(Checkpoint& ckpt) const {
    ckpt.put_matrix("encoder.embedding", embedding);
    save_cell(ckpt, "encoder.utterance", utterance);
    save_cell(ckpt, "encoder.context", context);
}

HierEncoderParams HierEncoderParams::load(const Checkpoint& ckpt) {
    HierEncoderParams p;
    p.embedding = ckpt.matrix("encoder.embedding");
    p.utterance = load_cell(ckpt, "encoder.utterance");
    p.context = load_cell(ckpt, "encoder.context");
    p.validate();
    return p;
}

VectorXd encode_utterance(std::span<const int> tokens, const HierEncoderParams& params) {
    const auto inputs = embed(tokens, params);
    return run_lstm(params.utterance, inputs).back();
}

VectorXd encode_context(std::span<const VectorXd> utterance_vectors, const HierEncoderParams& params) {
    if (utterance_vectors.empty()) throw ValidationError("cannot encode an empty context");
    return run_lstm(params.context, utterance_vectors).back();
}

EmbeddingTriple encode_triple(const EvalExample& example, const HierEncoderParams& params) {
    std::vector<VectorXd> turns;
    turns.reserve(example.context.utterances.size());
    for (const auto& u : example.context.utterances) turns.push_back(encode_utterance(tokens_of(u), params));

    auto single = [&](const Utterance& u) {
        const VectorXd v = encode_utterance(tokens_of(u), params);
        return encode_context(std::span<const VectorXd>(&v, 1), params);
    };
    return EmbeddingTriple{encode_context(turns, params), single(example.reference_response),
                           single(example.model_response)};
}

VectorXd forward_utterance(std::span<const int> tokens, const HierEncoderParams& params, SequenceCache& cache) {
    const auto inputs = embed(tokens, params);
    return run_lstm(params.utterance, inputs, &cache).back();
}

void backward_utterance(std::span<const int> tokens, const SequenceCache& cache, const VectorXd& d_output,
                        const HierEncoderParams& params, HierEncoderParams& grads) {
    std::vector<VectorXd> d_hidden(tokens.size());
    d_hidden.back() = d_output;
    const auto dx = backward_lstm(params.utterance, cache, d_hidden, grads.utterance);
    for (std::size_t t = 0; t < tokens.size(); ++t) grads.embedding.row(tokens[t]) += dx[t].transpose();
}

ContextForward forward_context(std::span<const std::vector<int>> utterances, const HierEncoderParams& params) {
    if (utterances.empty()) throw ValidationError("cannot encode an empty context");
    ContextForward fwd;
    fwd.utterance_caches.resize(utterances.size());
    for (std::size_t k = 0; k < utterances.size(); ++k) {
        fwd.utterance_vectors.push_back(forward_utterance(utterances[k], params, fwd.utterance_caches[k]));
    }
    fwd.context_states = run_lstm(params.context, fwd.utterance_vectors, &fwd.context_cache);
    return fwd;
}

void backward_context(std::span<const std::vector<int>> utterances, const ContextForward& fwd,
                      std::span<const VectorXd> d_states, std::span<const VectorXd> d_utterance,
                      const HierEncoderParams& params, HierEncoderParams& grads) {
    auto d_vectors = backward_lstm(params.context, fwd.context_cache, d_states, grads.context);
    for (std::size_t k = 0; k < utterances.size(); ++k) {
        if (k < d_utterance.size() && d_utterance[k].size() == d_vectors[k].size()) d_vectors[k] += d_utterance[k];
        backward_utterance(utterances[k], fwd.utterance_caches[k], d_vectors[k], params, grads);
    }
}

} // namespace dlev
