#pragma once

#include "dlev/checkpoint.hpp"
#include "dlev/corpus.hpp"
#include "dlev/encoder.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dlev {

// Mean-centered projection onto the top principal directions. Rows of
// `components` are orthonormal; each row's largest-magnitude entry is positive.
struct PcaProjection {
    VectorXd mean;
    MatrixXd components; // n x d
    VectorXd eigenvalues;

    int input_dim() const { return static_cast<int>(components.cols()); }
    int output_dim() const { return static_cast<int>(components.rows()); }
};

PcaProjection fit_pca(std::span<const VectorXd> vectors, int n);
VectorXd project(const VectorXd& v, const PcaProjection& pca);
VectorXd reconstruct(const VectorXd& y, const PcaProjection& pca);
EmbeddingTriple project(const EmbeddingTriple& t, const PcaProjection& pca);

// score = (c' M r̂ + r' N r̂ - alpha) / beta
struct AdemParams {
    MatrixXd M;
    MatrixXd N;
    double alpha = 0.0;
    double beta = 1.0;

    static AdemParams identity(int n);
    int dim() const { return static_cast<int>(M.rows()); }
    void validate() const;
};

struct Calibration {
    double alpha = 0.0;
    double beta = 1.0;
};

// beta = (max - min) / 4, alpha = min - beta, mapping the raw range onto [1,5].
Calibration init_alpha_beta(std::span<const double> raw_scores);

// c' M r̂ + r' N r̂
double raw_score(const MatrixXd& M, const MatrixXd& N, const EmbeddingTriple& t);
double adem_score(const AdemParams& params, const EmbeddingTriple& t);

struct ScoredTriple {
    EmbeddingTriple triple;
    double human = 0.0;
};

// Sum of squared errors plus gamma * (|M|_F^2 + |N|_F^2).
double adem_loss(const AdemParams& params, std::span<const ScoredTriple> batch, double gamma);

struct AdemGradient {
    MatrixXd dM;
    MatrixXd dN;
};

AdemGradient adem_loss_gradient(const AdemParams& params, std::span<const ScoredTriple> batch, double gamma);

// Lower edges of response-length bins in words; the last bin is open-ended.
struct LengthBins {
    std::vector<int> lower_edges{1, 6, 11, 21};

    int bin_of(int length) const;
    void validate() const;
};

// Per (rounded) score level, over-samples every length bin with replacement up
// to the size of the largest bin at that level. Returns indices into the input;
// all originals are kept, in order, followed by the drawn extras.
std::vector<std::size_t> subsample_indices(std::span<const int> lengths, std::span<const double> scores,
                                           const LengthBins& bins, std::uint64_t seed);

Dataset subsample_by_length(const Dataset& train, const LengthBins& bins, std::uint64_t seed);

struct TrainConfig {
    double gamma = 0.075;
    double learning_rate = 0.01;
    int batch_size = 32;
    int max_epochs = 50;
    int patience = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AdemLogRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_pearson = 0.0;
    double val_spearman = 0.0;
};

struct AdemTrainResult {
    AdemParams params;
    std::vector<AdemLogRow> log;
    int best_epoch = 0;
};

// One example after encoding and projection, with the fields analyses need.
struct EncodedExample {
    EmbeddingTriple triple;
    double human = 0.0;
    std::string context_id;
    SourceModel source = SourceModel::OTHER;
    int response_length = 0;
};

std::vector<EncodedExample> encode_examples(const Dataset& ds, const HierEncoderParams& encoder,
                                            const PcaProjection* pca);

// PCA over the union of context, reference and model-response embeddings.
PcaProjection fit_pca_on_dataset(const Dataset& train, const HierEncoderParams& encoder, int n);

// Identity init, alpha/beta calibrated once on the training set and frozen,
// minibatch Adam, early stopping on validation Pearson.
AdemTrainResult train_adem(std::span<const EncodedExample> train, std::span<const EncodedExample> validation,
                           const TrainConfig& cfg);
AdemTrainResult train_adem(const Dataset& train, const Dataset& validation, const PcaProjection& pca,
                           const HierEncoderParams& encoder, const TrainConfig& cfg);

std::vector<EncodedExample> subsample_by_length(std::span<const EncodedExample> train, const LengthBins& bins,
                                                std::uint64_t seed);

struct AdemFitOptions {
    TrainConfig train;
    bool subsample_length = true;
    LengthBins bins;
};

// Optional length sub-sampling of the training set (seeded from the training
// seed), then train_adem.
AdemTrainResult fit_adem(std::span<const EncodedExample> train, std::span<const EncodedExample> validation,
                         const AdemFitOptions& opts);

std::vector<double> score_encoded(const AdemParams& params, std::span<const EncodedExample> examples);

std::vector<std::pair<std::string, double>> predict(const AdemParams& params, const PcaProjection& pca,
                                                    const HierEncoderParams& encoder, const Dataset& examples);

void save_pca(Checkpoint& ckpt, const PcaProjection& pca);
PcaProjection load_pca(const Checkpoint& ckpt);

struct AdemModel {
    AdemParams params;
    PcaProjection pca;
    TrainConfig config;
};

void save_adem(const std::filesystem::path& path, const AdemModel& model);
AdemModel load_adem(const std::filesystem::path& path);

} // namespace dlev
