#pragma once

#include <map>
#include <vector>

#include "wk/backbone.hpp"

namespace wk {

// Two decoder target spaces: the unified encoding space that downstream
// consumers re-encode from, and a render space standing in for generative
// conditioning vectors.
enum class Space { unified, render };

// Per (modality, space): one attention block over the k_sig signal hiddens,
// mean-pooled, then an affine map into d_enc. A plain mean-pool would make
// k_sig meaningless; the mixer lets head positions specialize.
struct SignalHead {
    Modality modality = Modality::image;
    Space space = Space::unified;
    Tensor ln_g, ln_b;
    Tensor wq, wk_, wv, wo;
    Tensor out_w, out_b;

    static SignalHead init(Modality m, Space space, const ModelConfig& cfg, Rng& rng);
    void for_each_tensor(const std::function<void(Tensor&)>& fn);
};

ag::Var head_forward(SignalHead& head, VarCache& cache, const ag::Var& signal_hidden);

// ------------------------------------------------------ agent projectors

// Affine map d_enc -> d_agent fitted by least squares; connects unified
// space outputs to a downstream agent's encoder space.
struct AgentProjector {
    Mat W;  // d_enc x d_agent
    Vec b;  // d_agent
    double residual = 0.0;  // mean squared error over the fitting pairs
    bool rank_deficient = false;

    Vec apply(const Vec& x) const;
};

// Solves min ||X W + b - Y||^2 via normal equations; falls back to the
// pseudo-inverse (Jacobi eigendecomposition) when they are singular, which
// is reported through rank_deficient rather than thrown.
AgentProjector fit_agent_projector(const std::vector<std::pair<Vec, Vec>>& pairs);

std::string projector_to_json(const AgentProjector& p);
AgentProjector projector_from_json(const std::string& text);

}  // namespace wk
