#pragma once

#include "dlev/lstm.hpp"

#include <vector>

namespace dlev {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam over a fixed list of parameter tensors; moment buffers are matched to
// tensors by position, so callers must pass the same layout on every step.
class Adam {
  public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    void step(const std::vector<NamedTensor>& params, const std::vector<NamedTensor>& grads);
    long steps() const { return t_; }

  private:
    AdamConfig cfg_;
    long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// Scales every gradient so the global L2 norm is at most max_norm; returns the norm before clipping.
double clip_global_norm(const std::vector<NamedTensor>& grads, double max_norm);

} // namespace dlev
