#include "dlev/vhred.hpp"

#include "dlev/errors.hpp"
#include "dlev/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

namespace dlev {

namespace {

MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    }
    return m;
}

VectorXd log_softmax(const VectorXd& logits) {
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    return logits.array() - lse;
}

} // namespace

DiagGaussian DiagGaussian::from_log_var(const VectorXd& mean, const VectorXd& log_var) {
    return DiagGaussian{mean, log_var.array().exp().matrix()};
}

void DiagGaussian::validate() const {
    if (mean.size() != var.size()) throw ValidationError("Gaussian mean and variance differ in length");
    if (!(var.array() > 0.0).all()) throw ValidationError("Gaussian variances must be strictly positive");
}

double kl_diag_gaussian(const DiagGaussian& q, const DiagGaussian& p) {
    q.validate();
    p.validate();
    if (q.mean.size() != p.mean.size()) throw ValidationError("KL between Gaussians of different dimension");
    double kl = 0.0;
    for (Eigen::Index i = 0; i < q.mean.size(); ++i) {
        const double diff = q.mean[i] - p.mean[i];
        kl += 0.5 * (std::log(p.var[i] / q.var[i]) + (q.var[i] + diff * diff) / p.var[i] - 1.0);
    }
    return kl;
}

double anneal_weight(long batch_index, const AnnealSchedule& sched) {
    if (sched.total_batches < 1) throw UsageError("annealing length must be >= 1");
    if (batch_index <= 0) return 0.0;
    return std::min(1.0, static_cast<double>(batch_index) / static_cast<double>(sched.total_batches));
}

VectorXd sample_latent(const DiagGaussian& g, const VectorXd& noise) {
    if (noise.size() != g.mean.size()) throw ValidationError("latent noise dimension mismatch");
    return g.mean + g.var.array().sqrt().matrix().cwiseProduct(noise);
}

// ---------------------------------------------------------------------------

GaussianNet GaussianNet::init(int input, int hidden, int latent, std::mt19937_64& rng) {
    GaussianNet n;
    n.W1 = uniform_matrix(hidden, input, rng);
    n.b1 = VectorXd::Zero(hidden);
    n.W_mean = uniform_matrix(latent, hidden, rng);
    n.b_mean = VectorXd::Zero(latent);
    n.W_log_var = uniform_matrix(latent, hidden, rng);
    n.b_log_var = VectorXd::Zero(latent);
    return n;
}

GaussianNet GaussianNet::zeros_like() const {
    GaussianNet n;
    n.W1 = MatrixXd::Zero(W1.rows(), W1.cols());
    n.b1 = VectorXd::Zero(b1.size());
    n.W_mean = MatrixXd::Zero(W_mean.rows(), W_mean.cols());
    n.b_mean = VectorXd::Zero(b_mean.size());
    n.W_log_var = MatrixXd::Zero(W_log_var.rows(), W_log_var.cols());
    n.b_log_var = VectorXd::Zero(b_log_var.size());
    return n;
}

std::vector<NamedTensor> GaussianNet::tensors(const std::string& prefix) {
    return {{prefix + ".W1", as_span(W1)},           {prefix + ".b1", as_span(b1)},
            {prefix + ".W_mean", as_span(W_mean)},   {prefix + ".b_mean", as_span(b_mean)},
            {prefix + ".W_log_var", as_span(W_log_var)}, {prefix + ".b_log_var", as_span(b_log_var)}};
}

GaussianNet::Forward GaussianNet::forward(const VectorXd& input) const {
    if (input.size() != input_dim()) throw ValidationError("Gaussian net input dimension mismatch");
    Forward f;
    f.input = input;
    f.hidden = (W1 * input + b1).array().tanh();
    f.mean = W_mean * f.hidden + b_mean;
    f.log_var = W_log_var * f.hidden + b_log_var;
    return f;
}

VectorXd GaussianNet::backward(const Forward& fwd, const VectorXd& d_mean, const VectorXd& d_log_var,
                               GaussianNet& grads) const {
    grads.W_mean.noalias() += d_mean * fwd.hidden.transpose();
    grads.b_mean += d_mean;
    grads.W_log_var.noalias() += d_log_var * fwd.hidden.transpose();
    grads.b_log_var += d_log_var;
    const VectorXd d_hidden = W_mean.transpose() * d_mean + W_log_var.transpose() * d_log_var;
    const VectorXd d_pre = d_hidden.array() * (1.0 - fwd.hidden.array().square());
    grads.W1.noalias() += d_pre * fwd.input.transpose();
    grads.b1 += d_pre;
    return W1.transpose() * d_pre;
}

// ---------------------------------------------------------------------------

void VhredConfig::validate() const {
    encoder.validate();
    if (latent_dim < 1 || net_hidden < 1 || decoder_hidden < 1) throw UsageError("VHRED dimensions must be positive");
    if (!(word_dropout >= 0.0 && word_dropout < 1.0)) throw UsageError("word dropout rate must lie in [0,1)");
    if (anneal.total_batches < 1) throw UsageError("annealing length must be >= 1");
    if (batches < 0 || batch_size < 1) throw UsageError("VHRED batch settings must be positive");
    if (!(learning_rate > 0.0)) throw UsageError("VHRED learning rate must be positive");
}

VhredParams VhredParams::init(const VhredConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    VhredParams p;
    p.encoder = HierEncoderParams::init(cfg.encoder, seed);
    std::mt19937_64 rng(mix_seed(seed, 1));
    const int d = cfg.encoder.context_hidden;
    p.prior = GaussianNet::init(d, cfg.net_hidden, cfg.latent_dim, rng);
    p.posterior = GaussianNet::init(d + cfg.encoder.utterance_hidden, cfg.net_hidden, cfg.latent_dim, rng);
    p.decoder = LstmCellParams::init(cfg.encoder.embed_dim + cfg.latent_dim + d, cfg.decoder_hidden,
                                     cfg.encoder.layer_norm, rng);
    p.out_W = uniform_matrix(cfg.encoder.vocab_size, cfg.decoder_hidden, rng);
    p.out_b = VectorXd::Zero(cfg.encoder.vocab_size);
    return p;
}

VhredParams VhredParams::zeros_like() const {
    VhredParams g;
    g.encoder = encoder.zeros_like();
    g.prior = prior.zeros_like();
    g.posterior = posterior.zeros_like();
    g.decoder = decoder.zeros_like();
    g.out_W = MatrixXd::Zero(out_W.rows(), out_W.cols());
    g.out_b = VectorXd::Zero(out_b.size());
    return g;
}

std::vector<NamedTensor> VhredParams::tensors() {
    auto out = encoder.tensors();
    for (auto& t : prior.tensors("prior")) out.push_back(std::move(t));
    for (auto& t : posterior.tensors("posterior")) out.push_back(std::move(t));
    for (auto& t : decoder.tensors("decoder")) out.push_back(std::move(t));
    out.push_back({"decoder.out_W", as_span(out_W)});
    out.push_back({"decoder.out_b", as_span(out_b)});
    return out;
}

std::vector<Dialogue> dialogues_from_dataset(const Dataset& ds) {
    std::vector<Dialogue> out;
    std::unordered_set<std::string> seen;
    for (const auto& ex : ds) {
        if (!seen.insert(ex.context.context_id).second) continue;
        Dialogue d;
        for (const auto& u : ex.context.utterances) {
            if (!u.tokens) throw ValidationError("dataset must be tokenized before building dialogues");
            d.push_back(*u.tokens);
        }
        if (!ex.reference_response.tokens) throw ValidationError("dataset must be tokenized before building dialogues");
        d.push_back(*ex.reference_response.tokens);
        out.push_back(std::move(d));
    }
    return out;
}

BatchNoise draw_noise(std::span<const Dialogue> batch, int latent_dim, double word_dropout, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    BatchNoise noise;
    noise.reserve(batch.size());
    for (const auto& dialogue : batch) {
        std::vector<TurnNoise> turns;
        for (std::size_t k = 1; k < dialogue.size(); ++k) {
            TurnNoise tn;
            tn.epsilon.resize(latent_dim);
            for (int i = 0; i < latent_dim; ++i) tn.epsilon[i] = normal(rng);
            tn.dropped.assign(dialogue[k].size(), false);
            for (std::size_t t = 1; t < dialogue[k].size(); ++t) tn.dropped[t] = uniform(rng) < word_dropout;
            turns.push_back(std::move(tn));
        }
        noise.push_back(std::move(turns));
    }
    return noise;
}

namespace {

// ELBO of one dialogue; accumulates d(-objective) into grads when given.
ElboTerms dialogue_elbo(const Dialogue& dialogue, const VhredParams& params, double anneal_w,
                        const std::vector<TurnNoise>& noise, VhredParams* grads) {
    const auto& enc = params.encoder;
    const int n_utt = static_cast<int>(dialogue.size());
    const int latent = params.latent_dim();
    const int embed_dim = static_cast<int>(enc.embedding.cols());
    const int d = enc.output_dim();

    std::vector<SequenceCache> utt_caches(dialogue.size());
    std::vector<VectorXd> utt_vectors;
    for (int k = 0; k < n_utt; ++k) {
        utt_vectors.push_back(forward_utterance(dialogue[static_cast<std::size_t>(k)], enc, utt_caches[static_cast<std::size_t>(k)]));
    }
    SequenceCache ctx_cache;
    const auto ctx_states =
        run_lstm(enc.context, std::span<const VectorXd>(utt_vectors.data(), utt_vectors.size() - 1), &ctx_cache);

    std::vector<VectorXd> d_states(ctx_states.size(), VectorXd::Zero(d));
    std::vector<VectorXd> d_utt(utt_vectors.size(), VectorXd::Zero(enc.utterance.hidden()));

    ElboTerms terms;
    for (int k = 1; k < n_utt; ++k) {
        const auto& target = dialogue[static_cast<std::size_t>(k)];
        const auto& tn = noise[static_cast<std::size_t>(k - 1)];
        const VectorXd& ctx = ctx_states[static_cast<std::size_t>(k - 1)];

        const auto prior_f = params.prior.forward(ctx);
        VectorXd post_in(d + utt_vectors[static_cast<std::size_t>(k)].size());
        post_in << ctx, utt_vectors[static_cast<std::size_t>(k)];
        const auto post_f = params.posterior.forward(post_in);

        const auto q = DiagGaussian::from_log_var(post_f.mean, post_f.log_var);
        const auto p = DiagGaussian::from_log_var(prior_f.mean, prior_f.log_var);
        terms.kl += kl_diag_gaussian(q, p);
        const VectorXd sigma_q = q.var.array().sqrt();
        const VectorXd z = sample_latent(q, tn.epsilon);

        std::vector<int> inputs(target.size());
        std::vector<VectorXd> dec_in;
        dec_in.reserve(target.size());
        for (std::size_t t = 0; t < target.size(); ++t) {
            int prev = t == 0 ? Vocabulary::kEndOfUtterance : target[t - 1];
            if (t > 0 && tn.dropped[t]) prev = Vocabulary::kUnk;
            inputs[t] = prev;
            VectorXd x(embed_dim + latent + d);
            x << enc.embedding.row(prev).transpose(), z, ctx;
            dec_in.push_back(std::move(x));
        }
        SequenceCache dec_cache;
        const auto dec_h = run_lstm(params.decoder, dec_in, grads ? &dec_cache : nullptr);

        std::vector<VectorXd> d_dec_h;
        if (grads) d_dec_h.resize(target.size());
        for (std::size_t t = 0; t < target.size(); ++t) {
            const VectorXd logits = params.out_W * dec_h[t] + params.out_b;
            const VectorXd logp = log_softmax(logits);
            terms.reconstruction += logp[target[t]];
            ++terms.tokens;
            if (grads) {
                VectorXd d_logits = logp.array().exp();
                d_logits[target[t]] -= 1.0;
                grads->out_W.noalias() += d_logits * dec_h[t].transpose();
                grads->out_b += d_logits;
                d_dec_h[t] = params.out_W.transpose() * d_logits;
            }
        }
        if (!grads) continue;

        const auto dx = backward_lstm(params.decoder, dec_cache, d_dec_h, grads->decoder);
        VectorXd d_z = VectorXd::Zero(latent);
        VectorXd d_ctx = VectorXd::Zero(d);
        for (std::size_t t = 0; t < target.size(); ++t) {
            grads->encoder.embedding.row(inputs[t]) += dx[t].head(embed_dim).transpose();
            d_z += dx[t].segment(embed_dim, latent);
            d_ctx += dx[t].tail(d);
        }

        // Reparameterization plus the closed-form KL derivatives.
        const Eigen::ArrayXd diff = (q.mean - p.mean).array();
        const VectorXd d_mean_q = d_z.array() + anneal_w * diff / p.var.array();
        const VectorXd d_logvar_q =
            0.5 * d_z.array() * tn.epsilon.array() * sigma_q.array() + anneal_w * 0.5 * (q.var.array() / p.var.array() - 1.0);
        const VectorXd d_mean_p = -anneal_w * diff / p.var.array();
        const VectorXd d_logvar_p = anneal_w * 0.5 * (1.0 - (q.var.array() + diff.square()) / p.var.array());

        const VectorXd d_post_in = params.posterior.backward(post_f, d_mean_q, d_logvar_q, grads->posterior);
        d_ctx += d_post_in.head(d);
        d_utt[static_cast<std::size_t>(k)] += d_post_in.tail(d_post_in.size() - d);
        d_ctx += params.prior.backward(prior_f, d_mean_p, d_logvar_p, grads->prior);
        d_states[static_cast<std::size_t>(k - 1)] += d_ctx;
    }
    terms.objective = terms.reconstruction - anneal_w * terms.kl;

    if (grads) {
        const auto d_vectors = backward_lstm(enc.context, ctx_cache, d_states, grads->encoder.context);
        for (int k = 0; k < n_utt; ++k) {
            VectorXd g = d_utt[static_cast<std::size_t>(k)];
            if (k < n_utt - 1) g += d_vectors[static_cast<std::size_t>(k)];
            backward_utterance(dialogue[static_cast<std::size_t>(k)], utt_caches[static_cast<std::size_t>(k)], g, enc,
                               grads->encoder);
        }
    }
    return terms;
}

} // namespace

ElboTerms elbo_batch(std::span<const Dialogue> batch, const VhredParams& params, double anneal_w,
                     const BatchNoise& noise, VhredParams* grads) {
    if (batch.empty()) throw ValidationError("ELBO batch is empty");
    if (noise.size() != batch.size()) throw ValidationError("noise does not match the batch");
    ElboTerms total;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (batch[b].size() < 2) throw ValidationError("dialogue needs at least two utterances");
        const auto t = dialogue_elbo(batch[b], params, anneal_w, noise[b], grads);
        total.reconstruction += t.reconstruction;
        total.kl += t.kl;
        total.tokens += t.tokens;
    }
    total.objective = total.reconstruction - anneal_w * total.kl;
    return total;
}

ElboTerms elbo_batch(std::span<const Dialogue> batch, const VhredParams& params, double anneal_w, double word_dropout,
                     std::uint64_t seed, VhredParams* grads) {
    return elbo_batch(batch, params, anneal_w, draw_noise(batch, params.latent_dim(), word_dropout, seed), grads);
}

PretrainResult pretrain_vhred(std::span<const Dialogue> corpus, const VhredConfig& cfg, std::uint64_t seed,
                              const std::function<void(const PretrainLogRow&)>& on_batch) {
    cfg.validate();
    std::vector<Dialogue> usable;
    for (const auto& d : corpus) {
        if (d.size() >= 2) usable.push_back(d);
    }
    if (usable.empty()) throw ValidationError("pre-training corpus has no dialogue with two or more utterances");

    PretrainResult result{VhredParams::init(cfg, seed), {}};
    Adam adam(AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
    std::mt19937_64 order_rng(mix_seed(seed, 2));

    std::vector<std::size_t> order(usable.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();

    for (long b = 0; b < cfg.batches; ++b) {
        std::vector<Dialogue> batch;
        while (static_cast<int>(batch.size()) < std::min<int>(cfg.batch_size, static_cast<int>(usable.size()))) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), order_rng);
                cursor = 0;
            }
            batch.push_back(usable[order[cursor++]]);
        }

        const double w = anneal_weight(b, cfg.anneal);
        auto grads = result.params.zeros_like();
        const auto terms = elbo_batch(batch, result.params, w, cfg.word_dropout, mix_seed(seed, 1000 + static_cast<std::uint64_t>(b)), &grads);
        if (!std::isfinite(terms.objective)) {
            throw NumericalError("non-finite ELBO at batch " + std::to_string(b));
        }

        const auto grad_tensors = grads.tensors();
        clip_global_norm(grad_tensors, cfg.grad_clip);
        adam.step(result.params.tensors(), grad_tensors);

        PretrainLogRow row{b, terms.reconstruction, terms.kl, w, terms.objective};
        result.log.push_back(row);
        if (on_batch) on_batch(row);
    }
    return result;
}

} // namespace dlev
