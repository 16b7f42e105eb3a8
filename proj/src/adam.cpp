#include "dlev/adam.hpp"

#include "dlev/errors.hpp"

#include <cmath>

namespace dlev {

void Adam::step(const std::vector<NamedTensor>& params, const std::vector<NamedTensor>& grads) {
    if (params.size() != grads.size()) throw Error("Adam: parameter/gradient layout mismatch");
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.values.size(), 0.0);
            v_.emplace_back(p.values.size(), 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k].values;
        auto g = grads[k].values;
        auto& m = m_[k];
        auto& v = v_[k];
        if (p.size() != g.size() || p.size() != m.size()) throw Error("Adam: tensor '" + params[k].name + "' changed size");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            p[i] -= cfg_.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.epsilon);
        }
    }
}

double clip_global_norm(const std::vector<NamedTensor>& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads) {
        for (double x : g.values) sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (const auto& g : grads) {
            for (double& x : g.values) x *= scale;
        }
    }
    return norm;
}

} // namespace dlev
