#pragma once

#include "dlev/adam.hpp"
#include "dlev/encoder.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace dlev {

// Diagonal Gaussian; var holds per-dimension variances.
struct DiagGaussian {
    VectorXd mean;
    VectorXd var;

    static DiagGaussian from_log_var(const VectorXd& mean, const VectorXd& log_var);
    void validate() const;
};

// KL[q || p] in closed form, summed over dimensions.
double kl_diag_gaussian(const DiagGaussian& q, const DiagGaussian& p);

struct AnnealSchedule {
    long total_batches = 2000;
};

// min(1, batch_index / T)
double anneal_weight(long batch_index, const AnnealSchedule& sched);

// mean + sqrt(var) * noise
VectorXd sample_latent(const DiagGaussian& g, const VectorXd& noise);

// One tanh hidden layer mapping its input to (mean, log-variance).
struct GaussianNet {
    MatrixXd W1;
    VectorXd b1;
    MatrixXd W_mean;
    VectorXd b_mean;
    MatrixXd W_log_var;
    VectorXd b_log_var;

    int input_dim() const { return static_cast<int>(W1.cols()); }
    int latent_dim() const { return static_cast<int>(W_mean.rows()); }

    static GaussianNet init(int input, int hidden, int latent, std::mt19937_64& rng);
    GaussianNet zeros_like() const;
    std::vector<NamedTensor> tensors(const std::string& prefix);

    struct Forward {
        VectorXd input;
        VectorXd hidden;
        VectorXd mean;
        VectorXd log_var;
    };
    Forward forward(const VectorXd& input) const;
    // Returns dL/dinput; accumulates parameter gradients.
    VectorXd backward(const Forward& fwd, const VectorXd& d_mean, const VectorXd& d_log_var, GaussianNet& grads) const;
};

struct VhredConfig {
    EncoderConfig encoder;
    int latent_dim = 16;
    int net_hidden = 64;
    int decoder_hidden = 64;
    double word_dropout = 0.25;
    AnnealSchedule anneal;
    long batches = 2000;
    int batch_size = 8;
    double learning_rate = 2e-3;
    double grad_clip = 5.0;

    void validate() const;
};

// Encoder, prior P(z | context), posterior Q(z | context, utterance), and a
// decoder LSTM fed [embedding; z; context] at every step.
struct VhredParams {
    HierEncoderParams encoder;
    GaussianNet prior;
    GaussianNet posterior;
    LstmCellParams decoder;
    MatrixXd out_W; // vocab x decoder_hidden
    VectorXd out_b;

    static VhredParams init(const VhredConfig& cfg, std::uint64_t seed);
    VhredParams zeros_like() const;
    std::vector<NamedTensor> tensors();

    int latent_dim() const { return prior.latent_dim(); }
};

// Tokenized utterances of one dialogue; every turn after the first is predicted.
using Dialogue = std::vector<std::vector<int>>;

// Context turns followed by the reference response, once per context_id.
std::vector<Dialogue> dialogues_from_dataset(const Dataset& ds);

// Reparameterization noise and word-dropout mask for one predicted turn.
struct TurnNoise {
    VectorXd epsilon;
    std::vector<bool> dropped; // per decoder input position; position 0 is the start symbol
};
using BatchNoise = std::vector<std::vector<TurnNoise>>;

// Draws are made in a fixed order and do not depend on parameter values, so a
// fixed seed gives fixed noise across parameter perturbations.
BatchNoise draw_noise(std::span<const Dialogue> batch, int latent_dim, double word_dropout, std::uint64_t seed);

struct ElboTerms {
    double reconstruction = 0.0; // sum of log P(w | z, w_<)
    double kl = 0.0;
    double objective = 0.0;      // reconstruction - anneal_w * kl
    long tokens = 0;
};

// When grads is non-null it receives the gradient of -objective.
ElboTerms elbo_batch(std::span<const Dialogue> batch, const VhredParams& params, double anneal_w,
                     const BatchNoise& noise, VhredParams* grads = nullptr);
ElboTerms elbo_batch(std::span<const Dialogue> batch, const VhredParams& params, double anneal_w, double word_dropout,
                     std::uint64_t seed, VhredParams* grads = nullptr);

struct PretrainLogRow {
    long batch = 0;
    double reconstruction = 0.0;
    double kl = 0.0;
    double anneal_w = 0.0;
    double objective = 0.0;
};

struct PretrainResult {
    VhredParams params;
    std::vector<PretrainLogRow> log;
};

PretrainResult pretrain_vhred(std::span<const Dialogue> corpus, const VhredConfig& cfg, std::uint64_t seed,
                              const std::function<void(const PretrainLogRow&)>& on_batch = {});

} // namespace dlev
