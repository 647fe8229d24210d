#include "wk/reflector.hpp"

#include <cmath>

namespace wk {

using ag::Var;

namespace {
constexpr double kInitStd = 0.08;
}

Reflector Reflector::init(const ReflectorConfig& cfg, int d_model, int d_cond, uint64_t seed) {
    Reflector r;
    r.cfg = cfg;
    r.d_model = d_model;
    r.d_cond = d_cond;
    const int dq = r.dq();
    if (dq % cfg.n_heads != 0) fail(Err::InvalidConfig, "reflector d_q must divide by n_heads");
    Rng rng(seed ^ 0x4ef1ec7042ull);
    r.queries.init("reflector.queries", "reflector", Mat::randn(cfg.n_queries, dq, kInitStd, rng));
    r.cond_w.init("reflector.cond.w", "reflector", Mat::randn(d_cond, dq, kInitStd, rng));
    r.cond_b.init("reflector.cond.b", "reflector", Mat(1, dq));
    for (int l = 0; l < cfg.n_layers; ++l) {
        Layer layer;
        const std::string p = "reflector.layer" + std::to_string(l);
        layer.lnq_g.init(p + ".lnq.g", "reflector", Mat(1, dq, 1.0));
        layer.lnq_b.init(p + ".lnq.b", "reflector", Mat(1, dq));
        layer.wq.init(p + ".wq", "reflector", Mat::randn(dq, dq, kInitStd, rng));
        layer.wk_.init(p + ".wk", "reflector", Mat::randn(d_model, dq, kInitStd, rng));
        layer.wv.init(p + ".wv", "reflector", Mat::randn(d_model, dq, kInitStd, rng));
        layer.wo.init(p + ".wo", "reflector", Mat::randn(dq, dq, kInitStd, rng));
        layer.ln2_g.init(p + ".ln2.g", "reflector", Mat(1, dq, 1.0));
        layer.ln2_b.init(p + ".ln2.b", "reflector", Mat(1, dq));
        layer.w1.init(p + ".mlp1.w", "reflector", Mat::randn(dq, r.ff(), kInitStd, rng));
        layer.b1.init(p + ".mlp1.b", "reflector", Mat(1, r.ff()));
        layer.w2.init(p + ".mlp2.w", "reflector", Mat::randn(r.ff(), dq, kInitStd, rng));
        layer.b2.init(p + ".mlp2.b", "reflector", Mat(1, dq));
        r.layers.push_back(std::move(layer));
    }
    // Near-zero output projection: fresh context tokens start close to a
    // no-op and grow only as tuning finds signal worth injecting.
    r.out_w.init("reflector.out.w", "reflector", Mat::randn(dq, d_model, 0.01, rng));
    r.out_b.init("reflector.out.b", "reflector", Mat(1, d_model));
    return r;
}

void Reflector::for_each_tensor(const std::function<void(Tensor&)>& fn) {
    fn(queries);
    fn(cond_w);
    fn(cond_b);
    for (auto& l : layers) {
        fn(l.lnq_g); fn(l.lnq_b);
        fn(l.wq); fn(l.wk_); fn(l.wv); fn(l.wo);
        fn(l.ln2_g); fn(l.ln2_b);
        fn(l.w1); fn(l.b1); fn(l.w2); fn(l.b2);
    }
    fn(out_w);
    fn(out_b);
}

ContextLift ContextLift::init(int d_enc, int d_model, uint64_t seed) {
    ContextLift lift;
    Rng rng(seed ^ 0xc0f7e11f7ull);
    lift.W = Mat::randn(d_enc, d_model, 1.0 / std::sqrt(d_enc), rng);
    lift.b.assign(static_cast<size_t>(d_model), 0.0);
    lift.role_emb = Mat::randn(7, d_model, 0.3, rng);
    return lift;
}

namespace {

void lift_row(const ContextLift& lift, const Vec& emb, ContextRole role, Mat& out, int row) {
    const int d_model = lift.W.cols;
    const int role_idx = static_cast<int>(role);
    for (int j = 0; j < d_model; ++j) {
        double s = lift.b[j] + lift.role_emb.at(role_idx, j);
        for (size_t i = 0; i < emb.size(); ++i) s += emb[i] * lift.W.at(static_cast<int>(i), j);
        out.at(row, j) = s;
    }
}

ContextRole before_role(Modality m) {
    switch (m) {
        case Modality::image: return ContextRole::before_image;
        case Modality::video: return ContextRole::before_video;
        case Modality::audio: return ContextRole::before_audio;
        default: fail(Err::UnknownModality, "text has no context role");
    }
}

ContextRole after_role(Modality m) {
    switch (m) {
        case Modality::image: return ContextRole::after_image;
        case Modality::video: return ContextRole::after_video;
        case Modality::audio: return ContextRole::after_audio;
        default: fail(Err::UnknownModality, "text has no context role");
    }
}

}  // namespace

Mat encode_context(const ContextLift& lift, const TransitionSample& sample) {
    const int n_rows = static_cast<int>(sample.before.modalities.size()) + 1 +
                       static_cast<int>(sample.after.modalities.size());
    Mat out(n_rows, lift.W.cols);
    int r = 0;
    for (const auto& [m, e] : sample.before.modalities) lift_row(lift, e, before_role(m), out, r++);
    lift_row(lift, sample.action.embedding, ContextRole::action, out, r++);
    for (const auto& [m, e] : sample.after.modalities) lift_row(lift, e, after_role(m), out, r++);
    return out;
}

Vec encode_condition(const WorldState& state, const ActionDesc& action) {
    return condition_vector(state, action);
}

namespace {

Var reflect_graph(Reflector& refl, VarCache& c, const Mat& context_rows, const Vec& condition) {
    if (context_rows.rows < 1) fail(Err::EmptyRequest, "reflect: empty context");
    if (context_rows.cols != refl.d_model)
        fail(Err::DimensionMismatch, "reflect: context width != d_model");
    if (static_cast<int>(condition.size()) != refl.d_cond)
        fail(Err::DimensionMismatch, "reflect: condition dim mismatch");

    const int dq = refl.dq();
    const int n_heads = refl.cfg.n_heads;
    const int dh = dq / n_heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Var ctx = ag::constant(context_rows);
    Var cond = ag::add_rowvec(ag::matmul(ag::constant_row(condition), c.of(refl.cond_w)),
                              c.of(refl.cond_b));
    // Conditional queries: every query shifted by the projected condition.
    Var q = ag::add_rowvec(c.of(refl.queries), cond);

    for (auto& layer : refl.layers) {
        Var q_ln = ag::layernorm_rows(q, c.of(layer.lnq_g), c.of(layer.lnq_b));
        Var qq = ag::matmul(q_ln, c.of(layer.wq));
        Var kk = ag::matmul(ctx, c.of(layer.wk_));
        Var vv = ag::matmul(ctx, c.of(layer.wv));
        std::vector<Var> heads;
        heads.reserve(n_heads);
        for (int hd = 0; hd < n_heads; ++hd) {
            Var qh = ag::slice_cols(qq, hd * dh, (hd + 1) * dh);
            Var kh = ag::slice_cols(kk, hd * dh, (hd + 1) * dh);
            Var vh = ag::slice_cols(vv, hd * dh, (hd + 1) * dh);
            Var p = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), att_scale), false);
            heads.push_back(ag::matmul(p, vh));
        }
        Var attn = ag::matmul(ag::concat_cols(heads), c.of(layer.wo));
        q = ag::add(q, attn);
        Var m_in = ag::layernorm_rows(q, c.of(layer.ln2_g), c.of(layer.ln2_b));
        Var f = ag::add_rowvec(ag::matmul(m_in, c.of(layer.w1)), c.of(layer.b1));
        f = ag::gelu(f);
        f = ag::add_rowvec(ag::matmul(f, c.of(layer.w2)), c.of(layer.b2));
        q = ag::add(q, f);
    }
    return ag::add_rowvec(ag::matmul(q, c.of(refl.out_w)), c.of(refl.out_b));
}

}  // namespace

ContextTokens reflect(Reflector& refl, const Mat& context_rows, const Vec& condition) {
    VarCache cache;
    cache.inference = true;
    return ContextTokens{reflect_graph(refl, cache, context_rows, condition)->val};
}

ag::Var reflect_var(Reflector& refl, VarCache& cache, const Mat& context_rows,
                    const Vec& condition) {
    return reflect_graph(refl, cache, context_rows, condition);
}

}  // namespace wk
