#pragma once

#include <algorithm>
#include <map>
#include <string>

#include "posekit/graph.hpp"

namespace posekit {

struct GradCheckResult {
    double max_rel_error = 0.0;
    double min_abs_relu_input = 0.0;  // of the nominal forward pass
    std::map<std::string, double> per_param;
};

/// Compares analytic gradients against 64-bit central finite differences.
///
/// `build` receives a Graph<double> and a parameter store and must record the
/// full forward pass (registering every store entry via g.parameter) and
/// return the scalar loss node. The graph is rebuilt for every perturbation,
/// so `build` has to be a pure function of the store.
///
/// Checks at most `samples_per_param` evenly spaced elements per parameter.
/// Callers should resample the seed when min_abs_relu_input comes back below
/// ~10x eps; a perturbation crossing a relu kink invalidates the difference
/// quotient.
template <typename BuildFn>
GradCheckResult grad_check(std::map<std::string, Tensor<double>> params, BuildFn build,
                           double eps = 1e-5, int samples_per_param = 8) {
    GradCheckResult res;

    Graph<double> g;
    const int loss = build(g, params);
    g.backward(loss);
    res.min_abs_relu_input = g.min_abs_relu_input();

    std::map<std::string, Tensor<double>> analytic;
    for (int id = 0; id < g.num_nodes(); ++id) {
        const auto& n = g.node(id);
        if (n.op == Graph<double>::Op::Parameter) analytic[n.name] = n.grad;
    }

    auto loss_at = [&](const std::map<std::string, Tensor<double>>& p) {
        Graph<double> g2;
        return g2.value(build(g2, p))[0];
    };

    for (auto& [name, p] : params) {
        const Tensor<double>& an = analytic.at(name);
        double worst = 0.0;
        const int64_t n = p.size();
        const int k = static_cast<int>(std::min<int64_t>(n, samples_per_param));
        for (int s = 0; s < k; ++s) {
            const int64_t i = n * s / k;
            const double orig = p[i];
            p[i] = orig + eps;
            const double lp = loss_at(params);
            p[i] = orig - eps;
            const double lm = loss_at(params);
            p[i] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double denom = std::max({std::abs(fd), std::abs(an[i]), 1e-6});
            worst = std::max(worst, std::abs(fd - an[i]) / denom);
        }
        res.per_param[name] = worst;
        res.max_rel_error = std::max(res.max_rel_error, worst);
    }
    return res;
}

}  // namespace posekit
