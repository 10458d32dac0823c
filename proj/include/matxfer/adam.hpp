#pragma once

#include <vector>

#include "matxfer/graph.hpp"

namespace matxfer {

struct AdamConfig {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected adaptive-moment optimizer over a graph's parameters.
// step() reads the gradients left by the last backward pass. A non-finite
// gradient aborts the whole step (no parameter is touched) and throws
// NumericError naming the parameter.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(Graph& g);

    int t() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

private:
    AdamConfig cfg_;
    int t_ = 0;
    std::vector<Tensor> m_, v_;
};

} // namespace matxfer
