#include "dlev/adem.hpp"

#include "dlev/adam.hpp"
#include "dlev/errors.hpp"
#include "dlev/seed.hpp"
#include "dlev/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

namespace dlev {

// ---------------------------------------------------------------------------
// PCA

PcaProjection fit_pca(std::span<const VectorXd> vectors, int n) {
    if (n < 1) throw ValidationError("PCA dimension must be >= 1");
    if (vectors.empty()) throw ValidationError("PCA needs at least one vector");
    const auto d = vectors.front().size();
    if (n > d) {
        throw ValidationError("PCA dimension " + std::to_string(n) + " exceeds input dimension " + std::to_string(d));
    }
    if (static_cast<Eigen::Index>(vectors.size()) < n + 1) {
        throw ValidationError("PCA to " + std::to_string(n) + " dimensions needs at least " + std::to_string(n + 1) +
                              " vectors, got " + std::to_string(vectors.size()));
    }

    PcaProjection pca;
    pca.mean = VectorXd::Zero(d);
    for (const auto& v : vectors) {
        if (v.size() != d) throw ValidationError("PCA input vectors differ in dimension");
        pca.mean += v;
    }
    pca.mean /= static_cast<double>(vectors.size());

    MatrixXd cov = MatrixXd::Zero(d, d);
    for (const auto& v : vectors) {
        const VectorXd c = v - pca.mean;
        cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(vectors.size() - 1);

    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericalError("PCA eigendecomposition failed");

    // Eigenvalues come out ascending.
    pca.components.resize(n, d);
    pca.eigenvalues.resize(n);
    for (int k = 0; k < n; ++k) {
        const Eigen::Index col = d - 1 - k;
        VectorXd dir = solver.eigenvectors().col(col);
        Eigen::Index arg = 0;
        dir.cwiseAbs().maxCoeff(&arg);
        if (dir[arg] < 0.0) dir = -dir;
        pca.components.row(k) = dir.transpose();
        pca.eigenvalues[k] = solver.eigenvalues()[col];
    }
    return pca;
}

VectorXd project(const VectorXd& v, const PcaProjection& pca) {
    if (v.size() != pca.input_dim()) {
        throw ValidationError("projection input has dimension " + std::to_string(v.size()) + ", expected " +
                              std::to_string(pca.input_dim()));
    }
    return pca.components * (v - pca.mean);
}

VectorXd reconstruct(const VectorXd& y, const PcaProjection& pca) {
    if (y.size() != pca.output_dim()) throw ValidationError("reconstruction input dimension mismatch");
    return pca.mean + pca.components.transpose() * y;
}

EmbeddingTriple project(const EmbeddingTriple& t, const PcaProjection& pca) {
    return {project(t.context, pca), project(t.reference, pca), project(t.response, pca)};
}

// ---------------------------------------------------------------------------
// Scoring

AdemParams AdemParams::identity(int n) {
    if (n < 1) throw ValidationError("ADEM dimension must be >= 1");
    return AdemParams{MatrixXd::Identity(n, n), MatrixXd::Identity(n, n), 0.0, 1.0};
}

void AdemParams::validate() const {
    if (M.rows() != M.cols() || N.rows() != N.cols() || M.rows() != N.rows()) {
        throw ValidationError("ADEM matrices must be square and of equal size");
    }
    if (!M.allFinite() || !N.allFinite()) throw NumericalError("ADEM matrices contain non-finite values");
    if (!(beta > 0.0)) throw ValidationError("ADEM beta must be positive");
}

Calibration init_alpha_beta(std::span<const double> raw_scores) {
    if (raw_scores.size() < 2) throw ValidationError("calibration needs at least two raw scores");
    const auto [lo, hi] = std::minmax_element(raw_scores.begin(), raw_scores.end());
    if (*hi == *lo) throw ValidationError("calibration is degenerate: all raw scores are equal");
    Calibration c;
    c.beta = (*hi - *lo) / 4.0;
    c.alpha = *lo - c.beta;
    return c;
}

double raw_score(const MatrixXd& M, const MatrixXd& N, const EmbeddingTriple& t) {
    const auto n = M.rows();
    if (t.context.size() != n || t.reference.size() != n || t.response.size() != n) {
        throw ValidationError("embedding triple dimension does not match the ADEM matrices (" + std::to_string(n) + ")");
    }
    return t.context.dot(M * t.response) + t.reference.dot(N * t.response);
}

double adem_score(const AdemParams& params, const EmbeddingTriple& t) {
    return (raw_score(params.M, params.N, t) - params.alpha) / params.beta;
}

double adem_loss(const AdemParams& params, std::span<const ScoredTriple> batch, double gamma) {
    if (batch.empty()) throw ValidationError("ADEM loss of an empty batch");
    double loss = 0.0;
    for (const auto& ex : batch) {
        const double e = adem_score(params, ex.triple) - ex.human;
        loss += e * e;
    }
    return loss + gamma * (params.M.squaredNorm() + params.N.squaredNorm());
}

AdemGradient adem_loss_gradient(const AdemParams& params, std::span<const ScoredTriple> batch, double gamma) {
    AdemGradient g{2.0 * gamma * params.M, 2.0 * gamma * params.N};
    for (const auto& ex : batch) {
        const double coef = 2.0 * (adem_score(params, ex.triple) - ex.human) / params.beta;
        g.dM.noalias() += coef * ex.triple.context * ex.triple.response.transpose();
        g.dN.noalias() += coef * ex.triple.reference * ex.triple.response.transpose();
    }
    return g;
}

// ---------------------------------------------------------------------------
// Length sub-sampling

int LengthBins::bin_of(int length) const {
    if (lower_edges.empty()) throw ValidationError("length bin configuration is empty");
    if (length < lower_edges.front()) {
        throw ValidationError("response length " + std::to_string(length) + " is not covered by the length bins");
    }
    const auto it = std::upper_bound(lower_edges.begin(), lower_edges.end(), length);
    return static_cast<int>(std::distance(lower_edges.begin(), it)) - 1;
}

void LengthBins::validate() const {
    if (lower_edges.empty()) throw ValidationError("length bin configuration is empty");
    if (!std::is_sorted(lower_edges.begin(), lower_edges.end()) ||
        std::adjacent_find(lower_edges.begin(), lower_edges.end()) != lower_edges.end()) {
        throw ValidationError("length bin edges must be strictly increasing");
    }
}

std::vector<std::size_t> subsample_indices(std::span<const int> lengths, std::span<const double> scores,
                                           const LengthBins& bins, std::uint64_t seed) {
    bins.validate();
    if (lengths.size() != scores.size()) throw ValidationError("lengths and scores differ in size");

    std::map<long, std::map<int, std::vector<std::size_t>>> groups;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        groups[std::lround(scores[i])][bins.bin_of(lengths[i])].push_back(i);
    }

    std::vector<std::size_t> out(lengths.size());
    std::iota(out.begin(), out.end(), 0);
    std::mt19937_64 rng(seed);
    for (const auto& [level, by_bin] : groups) {
        std::size_t largest = 0;
        for (const auto& [bin, members] : by_bin) largest = std::max(largest, members.size());
        for (const auto& [bin, members] : by_bin) {
            std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
            for (std::size_t k = members.size(); k < largest; ++k) out.push_back(members[pick(rng)]);
        }
    }
    return out;
}

Dataset subsample_by_length(const Dataset& train, const LengthBins& bins, std::uint64_t seed) {
    std::vector<int> lengths;
    std::vector<double> scores;
    for (const auto& ex : train) {
        lengths.push_back(static_cast<int>(split_words(ex.model_response.text).size()));
        scores.push_back(ex.human_score);
    }
    Dataset out;
    for (auto i : subsample_indices(lengths, scores, bins, seed)) out.push_back(train[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
    if (!(gamma >= 0.0)) throw UsageError("gamma must be >= 0");
    if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
    if (batch_size < 1) throw UsageError("batch size must be >= 1");
    if (max_epochs < 0) throw UsageError("max epochs must be >= 0");
    if (patience < 1) throw UsageError("patience must be >= 1");
}

std::vector<EncodedExample> encode_examples(const Dataset& ds, const HierEncoderParams& encoder,
                                            const PcaProjection* pca) {
    std::vector<EncodedExample> out;
    out.reserve(ds.size());
    for (const auto& ex : ds) {
        EncodedExample e;
        e.triple = encode_triple(ex, encoder);
        if (pca != nullptr) e.triple = project(e.triple, *pca);
        e.human = ex.human_score;
        e.context_id = ex.context.context_id;
        e.source = ex.source_model;
        e.response_length = static_cast<int>(split_words(ex.model_response.text).size());
        out.push_back(std::move(e));
    }
    return out;
}

PcaProjection fit_pca_on_dataset(const Dataset& train, const HierEncoderParams& encoder, int n) {
    std::vector<VectorXd> vectors;
    vectors.reserve(3 * train.size());
    for (const auto& e : encode_examples(train, encoder, nullptr)) {
        vectors.push_back(e.triple.context);
        vectors.push_back(e.triple.reference);
        vectors.push_back(e.triple.response);
    }
    return fit_pca(vectors, n);
}

namespace {

struct Correlations {
    double pearson = std::numeric_limits<double>::quiet_NaN();
    double spearman = std::numeric_limits<double>::quiet_NaN();
};

Correlations evaluate(const AdemParams& params, std::span<const EncodedExample> data) {
    std::vector<double> pred;
    std::vector<double> human;
    for (const auto& e : data) {
        pred.push_back(adem_score(params, e.triple));
        human.push_back(e.human);
    }
    Correlations c;
    try {
        c.pearson = pearson(pred, human).coefficient;
        c.spearman = spearman(pred, human).coefficient;
    } catch (const Error&) {
        // undefined (constant predictions or too few points): stays NaN
    }
    return c;
}

} // namespace

AdemTrainResult train_adem(std::span<const EncodedExample> train, std::span<const EncodedExample> validation,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw ValidationError("ADEM training set is empty");
    if (validation.empty()) throw ValidationError("ADEM validation set is empty");

    const int n = static_cast<int>(train.front().triple.context.size());
    AdemParams params = AdemParams::identity(n);

    std::vector<ScoredTriple> data;
    data.reserve(train.size());
    std::vector<double> raw;
    for (const auto& e : train) {
        data.push_back({e.triple, e.human});
        raw.push_back(raw_score(params.M, params.N, e.triple));
    }
    const auto calib = init_alpha_beta(raw);
    params.alpha = calib.alpha;
    params.beta = calib.beta;

    AdemTrainResult result;
    auto log_epoch = [&](int epoch) {
        const double loss = adem_loss(params, data, cfg.gamma);
        if (!std::isfinite(loss)) throw NumericalError("non-finite ADEM loss at epoch " + std::to_string(epoch));
        const auto corr = evaluate(params, validation);
        result.log.push_back({epoch, loss, corr.pearson, corr.spearman});
        return corr.pearson;
    };

    double best = log_epoch(0);
    result.params = params;
    result.best_epoch = 0;
    int since_best = 0;

    Adam adam(AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<ScoredTriple> batch;
            batch.reserve(stop - start);
            for (auto k = start; k < stop; ++k) batch.push_back(data[order[k]]);
            auto grad = adem_loss_gradient(params, batch, cfg.gamma);
            adam.step({{"M", as_span(params.M)}, {"N", as_span(params.N)}},
                      {{"M", as_span(grad.dM)}, {"N", as_span(grad.dN)}});
        }
        const double val = log_epoch(epoch);
        if (!std::isnan(val) && (std::isnan(best) || val > best)) {
            best = val;
            result.params = params;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return result;
}

AdemTrainResult train_adem(const Dataset& train, const Dataset& validation, const PcaProjection& pca,
                           const HierEncoderParams& encoder, const TrainConfig& cfg) {
    if (validation.empty()) throw ValidationError("ADEM validation set is empty");
    const auto tr = encode_examples(train, encoder, &pca);
    const auto va = encode_examples(validation, encoder, &pca);
    return train_adem(tr, va, cfg);
}

std::vector<EncodedExample> subsample_by_length(std::span<const EncodedExample> train, const LengthBins& bins,
                                                std::uint64_t seed) {
    std::vector<int> lengths;
    std::vector<double> scores;
    for (const auto& e : train) {
        lengths.push_back(e.response_length);
        scores.push_back(e.human);
    }
    std::vector<EncodedExample> out;
    for (auto i : subsample_indices(lengths, scores, bins, seed)) out.push_back(train[i]);
    return out;
}

AdemTrainResult fit_adem(std::span<const EncodedExample> train, std::span<const EncodedExample> validation,
                         const AdemFitOptions& opts) {
    if (!opts.subsample_length) return train_adem(train, validation, opts.train);
    const auto balanced = subsample_by_length(train, opts.bins, mix_seed(opts.train.seed, 7));
    return train_adem(balanced, validation, opts.train);
}

std::vector<double> score_encoded(const AdemParams& params, std::span<const EncodedExample> examples) {
    std::vector<double> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(adem_score(params, e.triple));
    return out;
}

std::vector<std::pair<std::string, double>> predict(const AdemParams& params, const PcaProjection& pca,
                                                    const HierEncoderParams& encoder, const Dataset& examples) {
    if (pca.input_dim() != encoder.output_dim()) {
        throw ValidationError("PCA input dimension does not match the encoder output dimension");
    }
    if (pca.output_dim() != params.dim()) throw ValidationError("PCA output dimension does not match ADEM");
    std::vector<std::pair<std::string, double>> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        const auto t = project(encode_triple(ex, encoder), pca);
        out.emplace_back(ex.context.context_id, adem_score(params, t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

void save_pca(Checkpoint& ckpt, const PcaProjection& pca) {
    ckpt.put_vector("pca.mean", pca.mean);
    ckpt.put_matrix("pca.components", pca.components);
    ckpt.put_vector("pca.eigenvalues", pca.eigenvalues);
}

PcaProjection load_pca(const Checkpoint& ckpt) {
    PcaProjection pca;
    pca.mean = ckpt.vector("pca.mean");
    pca.components = ckpt.matrix("pca.components");
    pca.eigenvalues = ckpt.vector("pca.eigenvalues");
    if (pca.components.cols() != pca.mean.size()) throw ValidationError("PCA checkpoint shapes are inconsistent");
    return pca;
}

void save_adem(const std::filesystem::path& path, const AdemModel& model) {
    Checkpoint ckpt;
    ckpt.put_matrix("adem.M", model.params.M);
    ckpt.put_matrix("adem.N", model.params.N);
    ckpt.put_scalar("adem.alpha", model.params.alpha);
    ckpt.put_scalar("adem.beta", model.params.beta);
    save_pca(ckpt, model.pca);
    ckpt.put_scalar("config.gamma", model.config.gamma);
    ckpt.put_scalar("config.learning_rate", model.config.learning_rate);
    ckpt.put_scalar("config.batch_size", model.config.batch_size);
    ckpt.put_scalar("config.max_epochs", model.config.max_epochs);
    ckpt.put_scalar("config.patience", model.config.patience);
    // 16-bit chunks keep the 64-bit seed exact in float32 storage.
    Tensor seed{{4}, {}};
    for (int k = 0; k < 4; ++k) seed.values.push_back(static_cast<float>((model.config.seed >> (16 * k)) & 0xFFFF));
    ckpt.put("config.seed", std::move(seed));
    ckpt.save(path);
}

AdemModel load_adem(const std::filesystem::path& path) {
    const auto ckpt = Checkpoint::load(path);
    AdemModel m;
    m.params.M = ckpt.matrix("adem.M");
    m.params.N = ckpt.matrix("adem.N");
    m.params.alpha = ckpt.scalar("adem.alpha");
    m.params.beta = ckpt.scalar("adem.beta");
    m.params.validate();
    m.pca = load_pca(ckpt);
    m.config.gamma = ckpt.scalar_or("config.gamma", m.config.gamma);
    m.config.learning_rate = ckpt.scalar_or("config.learning_rate", m.config.learning_rate);
    m.config.batch_size = static_cast<int>(ckpt.scalar_or("config.batch_size", m.config.batch_size));
    m.config.max_epochs = static_cast<int>(ckpt.scalar_or("config.max_epochs", m.config.max_epochs));
    m.config.patience = static_cast<int>(ckpt.scalar_or("config.patience", m.config.patience));
    if (ckpt.contains("config.seed")) {
        const auto& t = ckpt.get("config.seed");
        std::uint64_t seed = 0;
        for (std::size_t k = 0; k < t.values.size() && k < 4; ++k) {
            seed |= static_cast<std::uint64_t>(t.values[k]) << (16 * k);
        }
        m.config.seed = seed;
    }
    return m;
}

} // namespace dlev
