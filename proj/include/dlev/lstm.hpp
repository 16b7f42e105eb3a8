#pragma once

#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dlev {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Flat view of one parameter tensor, used by optimizers and gradient checks.
struct NamedTensor {
    std::string name;
    std::span<double> values;
};

inline std::span<double> as_span(MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline std::span<double> as_span(VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

inline constexpr double kLayerNormEps = 1e-12;

// (a - mean(a)) / sqrt(var(a) + eps), population variance. A constant input maps to zero.
VectorXd layer_norm(const VectorXd& a, double eps = kLayerNormEps);

// Gate order in the stacked blocks: input, forget, output, candidate.
enum Gate : int { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCandidate = 3 };

// LSTM cell with per-gate layer normalization:
//   a_g = W_g x + U_g h + b_g,  z_g = gain_g * LN(a_g) + shift_g
// With layer_norm off, LN is the identity.
struct LstmCellParams {
    MatrixXd W;        // 4H x I
    MatrixXd U;        // 4H x H
    VectorXd b;        // 4H
    VectorXd ln_gain;  // 4H
    VectorXd ln_shift; // 4H
    bool layer_norm = true;

    int hidden() const { return static_cast<int>(U.cols()); }
    int input() const { return static_cast<int>(W.cols()); }

    // Zero weights, unit gain, zero shift.
    static LstmCellParams zeros(int input, int hidden, bool layer_norm);
    // Weights ~ U(-0.1, 0.1), zero biases, unit gains, forget-gate shift +1.
    static LstmCellParams init(int input, int hidden, bool layer_norm, std::mt19937_64& rng);
    // All tensors zero, including the gains (gradient accumulator).
    LstmCellParams zeros_like() const {
        auto p = zeros(input(), hidden(), layer_norm);
        p.ln_gain.setZero();
        return p;
    }

    void validate() const;
    std::vector<NamedTensor> tensors(const std::string& prefix);
};

struct LstmState {
    VectorXd h;
    VectorXd c;

    static LstmState zeros(int hidden) { return {VectorXd::Zero(hidden), VectorXd::Zero(hidden)}; }
};

struct LstmStepCache {
    VectorXd x;
    VectorXd h_prev;
    VectorXd c_prev;
    VectorXd normalized; // LN output per gate block, before gain/shift
    Eigen::Vector4d inv_std = Eigen::Vector4d::Ones();
    VectorXd gates;      // activations [i, f, o, u]
    VectorXd c;
    VectorXd tanh_c;
};

LstmState lstm_step(const LstmCellParams& cell, const VectorXd& x, const LstmState& state,
                    LstmStepCache* cache = nullptr);

struct LstmStepGrad {
    VectorXd dx;
    VectorXd dh_prev;
    VectorXd dc_prev;
};

// Backward through one step given dL/dh and dL/dc of its output state.
// Parameter gradients are accumulated into `grads`.
LstmStepGrad lstm_step_backward(const LstmCellParams& cell, const LstmStepCache& cache, const VectorXd& dh,
                                const VectorXd& dc, LstmCellParams& grads);

using SequenceCache = std::vector<LstmStepCache>;

// Runs the cell from the zero state; returns the hidden state after every step.
std::vector<VectorXd> run_lstm(const LstmCellParams& cell, std::span<const VectorXd> inputs,
                               SequenceCache* cache = nullptr);

// BPTT. d_hidden[t] is the external gradient on the hidden state of step t.
// Returns the gradient with respect to every input.
std::vector<VectorXd> backward_lstm(const LstmCellParams& cell, const SequenceCache& cache,
                                    std::span<const VectorXd> d_hidden, LstmCellParams& grads);

} // namespace dlev
