#include "matxfer/adam.hpp"

#include <cmath>

#include "matxfer/errors.hpp"

namespace matxfer {

void Adam::step(Graph& g) {
    const std::vector<int>& params = g.params();
    if (m_.empty()) {
        for (int p : params) {
            m_.emplace_back(g.param_value(p).shape);
            v_.emplace_back(g.param_value(p).shape);
        }
    }

    // Validate every gradient first so a bad one aborts the step cleanly.
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const Tensor& grad = g.grad(params[pi]);
        for (float gv : grad.data) {
            if (!std::isfinite(gv))
                throw NumericError("non-finite gradient in parameter '" +
                                   g.node_name(params[pi]) + "'");
        }
    }

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = g.param_value(params[pi]);
        const Tensor& grad = g.grad(params[pi]);
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double gv = grad.data[i];
            const double mi = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * gv;
            const double vi = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * gv * gv;
            m.data[i] = static_cast<float>(mi);
            v.data[i] = static_cast<float>(vi);
            p.data[i] -= static_cast<float>(cfg_.lr * (mi / bc1) /
                                            (std::sqrt(vi / bc2) + cfg_.eps));
        }
    }
}

} // namespace matxfer
