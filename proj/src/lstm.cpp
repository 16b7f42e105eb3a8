#include "dlev/lstm.hpp"

#include "dlev/errors.hpp"

#include <cmath>

namespace dlev {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    }
    return m;
}

} // namespace

VectorXd layer_norm(const VectorXd& a, double eps) {
    const double mean = a.mean();
    const VectorXd centered = a.array() - mean;
    const double var = centered.squaredNorm() / static_cast<double>(a.size());
    return centered / std::sqrt(var + eps);
}

LstmCellParams LstmCellParams::zeros(int input, int hidden, bool layer_norm) {
    LstmCellParams p;
    p.W = MatrixXd::Zero(4 * hidden, input);
    p.U = MatrixXd::Zero(4 * hidden, hidden);
    p.b = VectorXd::Zero(4 * hidden);
    p.ln_gain = VectorXd::Ones(4 * hidden);
    p.ln_shift = VectorXd::Zero(4 * hidden);
    p.layer_norm = layer_norm;
    return p;
}

LstmCellParams LstmCellParams::init(int input, int hidden, bool layer_norm, std::mt19937_64& rng) {
    auto p = zeros(input, hidden, layer_norm);
    p.W = uniform_matrix(4 * hidden, input, rng);
    p.U = uniform_matrix(4 * hidden, hidden, rng);
    p.ln_shift.segment(kForgetGate * hidden, hidden).setConstant(1.0);
    return p;
}

void LstmCellParams::validate() const {
    const auto h = U.cols();
    if (h < 1 || U.rows() != 4 * h || W.rows() != 4 * h || b.size() != 4 * h || ln_gain.size() != 4 * h ||
        ln_shift.size() != 4 * h) {
        throw ValidationError("LSTM cell parameter shapes are inconsistent with the hidden size");
    }
}

std::vector<NamedTensor> LstmCellParams::tensors(const std::string& prefix) {
    return {{prefix + ".W", as_span(W)},
            {prefix + ".U", as_span(U)},
            {prefix + ".b", as_span(b)},
            {prefix + ".ln_gain", as_span(ln_gain)},
            {prefix + ".ln_shift", as_span(ln_shift)}};
}

LstmState lstm_step(const LstmCellParams& cell, const VectorXd& x, const LstmState& state, LstmStepCache* cache) {
    const int h = cell.hidden();
    if (x.size() != cell.input()) {
        throw ValidationError("LSTM input has dimension " + std::to_string(x.size()) + ", cell expects " +
                              std::to_string(cell.input()));
    }
    if (state.h.size() != h || state.c.size() != h) throw ValidationError("LSTM state dimension mismatch");

    const VectorXd pre = cell.W * x + cell.U * state.h + cell.b;
    VectorXd normalized(4 * h);
    Eigen::Vector4d inv_std = Eigen::Vector4d::Ones();
    for (int g = 0; g < 4; ++g) {
        const VectorXd block = pre.segment(g * h, h);
        if (cell.layer_norm) {
            const VectorXd centered = block.array() - block.mean();
            inv_std[g] = 1.0 / std::sqrt(centered.squaredNorm() / h + kLayerNormEps);
            normalized.segment(g * h, h) = centered * inv_std[g];
        } else {
            normalized.segment(g * h, h) = block;
        }
    }
    const VectorXd z = cell.ln_gain.cwiseProduct(normalized) + cell.ln_shift;

    VectorXd gates(4 * h);
    for (int k = 0; k < 3 * h; ++k) gates[k] = sigmoid(z[k]);
    for (int k = 3 * h; k < 4 * h; ++k) gates[k] = std::tanh(z[k]);

    LstmState out;
    out.c = gates.segment(kForgetGate * h, h).cwiseProduct(state.c) +
            gates.segment(kInputGate * h, h).cwiseProduct(gates.segment(kCandidate * h, h));
    const VectorXd tanh_c = out.c.array().tanh();
    out.h = gates.segment(kOutputGate * h, h).cwiseProduct(tanh_c);

    if (cache != nullptr) {
        cache->x = x;
        cache->h_prev = state.h;
        cache->c_prev = state.c;
        cache->normalized = std::move(normalized);
        cache->inv_std = inv_std;
        cache->gates = std::move(gates);
        cache->c = out.c;
        cache->tanh_c = tanh_c;
    }
    return out;
}

LstmStepGrad lstm_step_backward(const LstmCellParams& cell, const LstmStepCache& cache, const VectorXd& dh,
                                const VectorXd& dc, LstmCellParams& grads) {
    const int h = cell.hidden();
    const auto i_gate = cache.gates.segment(kInputGate * h, h).array();
    const auto f_gate = cache.gates.segment(kForgetGate * h, h).array();
    const auto o_gate = cache.gates.segment(kOutputGate * h, h).array();
    const auto cand = cache.gates.segment(kCandidate * h, h).array();
    const auto tc = cache.tanh_c.array();

    const Eigen::ArrayXd dc_total = dc.array() + dh.array() * o_gate * (1.0 - tc * tc);

    VectorXd dz(4 * h);
    dz.segment(kInputGate * h, h) = dc_total * cand * i_gate * (1.0 - i_gate);
    dz.segment(kForgetGate * h, h) = dc_total * cache.c_prev.array() * f_gate * (1.0 - f_gate);
    dz.segment(kOutputGate * h, h) = dh.array() * tc * o_gate * (1.0 - o_gate);
    dz.segment(kCandidate * h, h) = dc_total * i_gate * (1.0 - cand * cand);

    grads.ln_gain += dz.cwiseProduct(cache.normalized);
    grads.ln_shift += dz;
    const VectorXd dn = dz.cwiseProduct(cell.ln_gain);

    VectorXd da(4 * h);
    if (cell.layer_norm) {
        for (int g = 0; g < 4; ++g) {
            const auto dn_g = dn.segment(g * h, h).array();
            const auto n_g = cache.normalized.segment(g * h, h).array();
            da.segment(g * h, h) = cache.inv_std[g] * (dn_g - dn_g.mean() - n_g * (dn_g * n_g).mean());
        }
    } else {
        da = dn;
    }

    grads.W.noalias() += da * cache.x.transpose();
    grads.U.noalias() += da * cache.h_prev.transpose();
    grads.b += da;

    LstmStepGrad out;
    out.dx = cell.W.transpose() * da;
    out.dh_prev = cell.U.transpose() * da;
    out.dc_prev = (dc_total * f_gate).matrix();
    return out;
}

std::vector<VectorXd> run_lstm(const LstmCellParams& cell, std::span<const VectorXd> inputs, SequenceCache* cache) {
    auto state = LstmState::zeros(cell.hidden());
    std::vector<VectorXd> hidden;
    hidden.reserve(inputs.size());
    if (cache != nullptr) cache->assign(inputs.size(), LstmStepCache{});
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        state = lstm_step(cell, inputs[t], state, cache != nullptr ? &(*cache)[t] : nullptr);
        hidden.push_back(state.h);
    }
    return hidden;
}

std::vector<VectorXd> backward_lstm(const LstmCellParams& cell, const SequenceCache& cache,
                                    std::span<const VectorXd> d_hidden, LstmCellParams& grads) {
    const int h = cell.hidden();
    std::vector<VectorXd> dx(cache.size());
    VectorXd dh_next = VectorXd::Zero(h);
    VectorXd dc_next = VectorXd::Zero(h);
    for (std::size_t t = cache.size(); t-- > 0;) {
        VectorXd dh = dh_next;
        if (t < d_hidden.size() && d_hidden[t].size() == h) dh += d_hidden[t];
        auto step = lstm_step_backward(cell, cache[t], dh, dc_next, grads);
        dx[t] = std::move(step.dx);
        dh_next = std::move(step.dh_prev);
        dc_next = std::move(step.dc_prev);
    }
    return dx;
}

} // namespace dlev
