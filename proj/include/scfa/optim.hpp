#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "scfa/model.hpp"
#include "scfa/tensor.hpp"

namespace scfa {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment tensors keyed like the parameters they track.
// Slots materialize as zeros the first time a parameter receives a
// gradient.
struct AdamState {
    ModelParams m;
    ModelParams v;
};

inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                      std::size_t t, double lr, const AdamConfig& cfg = {}) {
    if (t < 1) throw std::invalid_argument("adam_step: step index must be >= 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

    for (auto& [name, p] : params) {
        const auto git = grads.find(name);
        if (git == grads.end()) continue;  // parameters outside the loss graph stay put
        const Tensor& g = git->second;
        if (!p.same_shape(g)) {
            throw std::invalid_argument("adam_step: gradient for " + name + " has shape " +
                                        shape_string(g.shape) + ", parameter has " +
                                        shape_string(p.shape));
        }

        Tensor& m = state.m[name];
        Tensor& v = state.v[name];
        if (m.shape.empty()) m = Tensor(p.shape);
        if (v.shape.empty()) v = Tensor(p.shape);
        if (!m.same_shape(p) || !v.same_shape(p)) {
            throw std::invalid_argument("adam_step: stale moment shape for " + name);
        }

        for (std::size_t i = 0; i < p.size(); ++i) {
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

// Cosine annealing from eta_max at t=0 to eta_min at t=T_total.
inline double cosine_lr(std::size_t t, std::size_t t_total, double eta_max, double eta_min) {
    if (t_total == 0) throw std::invalid_argument("cosine_lr: schedule length must be positive");
    if (t > t_total) throw std::invalid_argument("cosine_lr: step beyond schedule end");
    const double phase = static_cast<double>(t) / static_cast<double>(t_total);
    return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + std::cos(M_PI * phase));
}

}  // namespace scfa
