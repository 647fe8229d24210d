#pragma once

#include <cmath>
#include <string>
#include <unordered_map>

#include "wk/autograd.hpp"
#include "wk/mat.hpp"

namespace wk {

// A named, trainable matrix with Adam state. Components group tensors for
// freezing and checksumming ("base", "adapters", "heads_unified",
// "heads_render", "reflector").
struct Tensor {
    std::string name;
    std::string component;
    Mat value;
    Mat adam_m, adam_v;
    int64_t adam_t = 0;
    bool frozen = false;

    void init(std::string n, std::string comp, Mat v) {
        name = std::move(n);
        component = std::move(comp);
        value = std::move(v);
        adam_m = Mat(value.rows, value.cols);
        adam_v = Mat(value.rows, value.cols);
    }
};

// Per-graph leaf cache: each tensor appears once per step so gradient
// contributions from every use accumulate on a single node.
struct VarCache {
    std::unordered_map<Tensor*, ag::Var> vars;
    bool inference = false;

    ag::Var of(Tensor& t) {
        auto it = vars.find(&t);
        if (it != vars.end()) return it->second;
        ag::Var v = ag::leaf(t.value, !inference && !t.frozen);
        vars.emplace(&t, v);
        return v;
    }
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One Adam update for every unfrozen tensor that received gradient. Updates
// are elementwise per tensor, so map iteration order cannot affect results.
inline void adam_step(VarCache& cache, const AdamConfig& cfg) {
    for (auto& [t, var] : cache.vars) {
        if (t->frozen || !var->requires_grad || var->grad.rows == 0) continue;
        t->adam_t += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t->adam_t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t->adam_t));
        for (size_t i = 0; i < t->value.a.size(); ++i) {
            const double g = var->grad.a[i];
            t->adam_m.a[i] = cfg.beta1 * t->adam_m.a[i] + (1.0 - cfg.beta1) * g;
            t->adam_v.a[i] = cfg.beta2 * t->adam_v.a[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = t->adam_m.a[i] / bc1;
            const double vhat = t->adam_v.a[i] / bc2;
            t->value.a[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace wk
