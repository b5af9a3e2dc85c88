#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "posekit/tensor.hpp"

namespace posekit {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

/// Adam with bias correction, state keyed by parameter name.
class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(std::map<std::string, Tensor<float>>& params,
              const std::map<std::string, Tensor<float>>& grads) {
        ++t_;
        const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
        const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
        for (auto& [name, p] : params) {
            auto git = grads.find(name);
            if (git == grads.end()) continue;
            const Tensor<float>& g = git->second;
            if (!g.same_shape(p)) throw std::invalid_argument("adam: grad shape mismatch for " + name);
            Tensor<float>& m = slot(m_, name, p);
            Tensor<float>& v = slot(v_, name, p);
            for (int64_t i = 0; i < p.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0f - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0f - cfg_.beta2) * g[i] * g[i];
                const float mhat = m[i] / bc1;
                const float vhat = v[i] / bc2;
                p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    int64_t steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(float lr) { cfg_.lr = lr; }

private:
    static Tensor<float>& slot(std::map<std::string, Tensor<float>>& store,
                               const std::string& name, const Tensor<float>& like) {
        auto it = store.find(name);
        if (it == store.end()) it = store.emplace(name, Tensor<float>(like.shape())).first;
        return it->second;
    }

    AdamConfig cfg_;
    int64_t t_ = 0;
    std::map<std::string, Tensor<float>> m_, v_;
};

}  // namespace posekit
