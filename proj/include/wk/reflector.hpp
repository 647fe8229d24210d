#pragma once

#include <vector>

#include "wk/backbone.hpp"
#include "wk/core.hpp"
#include "wk/framing.hpp"
#include "wk/params.hpp"

namespace wk {

struct ReflectorConfig {
    int n_queries = 4;
    int n_layers = 2;
    int n_heads = 4;
    int d_q = 0;   // 0 => d_model
    int d_ff = 0;  // 0 => 4 * d_q
};

// Condition-aware querying transformer: n_queries learnable queries, shifted
// by a projection of the condition, cross-attend to the context rows and
// compress them into exactly n_queries context tokens. Trained from scratch.
struct Reflector {
    ReflectorConfig cfg;
    int d_model = 0;
    int d_cond = 0;

    Tensor queries;         // n_queries x d_q
    Tensor cond_w, cond_b;  // d_cond x d_q
    struct Layer {
        Tensor lnq_g, lnq_b;
        Tensor wq, wk_, wv, wo;
        Tensor ln2_g, ln2_b;
        Tensor w1, b1, w2, b2;
    };
    std::vector<Layer> layers;
    Tensor out_w, out_b;  // d_q x d_model

    static Reflector init(const ReflectorConfig& cfg, int d_model, int d_cond, uint64_t seed);
    void for_each_tensor(const std::function<void(Tensor&)>& fn);

    int dq() const { return cfg.d_q > 0 ? cfg.d_q : d_model; }
    int ff() const { return cfg.d_ff > 0 ? cfg.d_ff : 4 * dq(); }
};

// Fixed (never trained) affine lift of raw context components into d_model
// rows, with a role embedding per component kind. It is stored in the
// checkpoint: both the reflector's context encoding and the in-context
// baselines read contexts through the same map.
struct ContextLift {
    Mat W;         // d_enc x d_model
    Vec b;         // d_model
    Mat role_emb;  // 7 x d_model

    static ContextLift init(int d_enc, int d_model, uint64_t seed);
};

// Context component roles, canonical row order.
enum class ContextRole {
    before_image = 0,
    before_video = 1,
    before_audio = 2,
    action = 3,
    after_image = 4,
    after_video = 5,
    after_audio = 6,
};

// One row per available component of a transition sample.
Mat encode_context(const ContextLift& lift, const TransitionSample& sample);

// Condition vector for the reflector: shared definition with the retrieval
// key (pre-normalization concatenation).
Vec encode_condition(const WorldState& state, const ActionDesc& action);

// 4 context tokens from one context matrix, conditioned on the query.
ContextTokens reflect(Reflector& refl, const Mat& context_rows, const Vec& condition);

// Autograd variant used during tuning.
ag::Var reflect_var(Reflector& refl, VarCache& cache, const Mat& context_rows,
                    const Vec& condition);

}  // namespace wk
