#include "wk/backbone.hpp"

#include <cmath>

namespace wk {

using ag::Var;

namespace {

constexpr double kInitStd = 0.08;

void init_linear(Tensor& w, Tensor& b, const std::string& name, const std::string& comp,
                 int d_in, int d_out, Rng& rng) {
    w.init(name + ".w", comp, Mat::randn(d_in, d_out, kInitStd, rng));
    b.init(name + ".b", comp, Mat(1, d_out));
}

void init_ln(Tensor& g, Tensor& b, const std::string& name, const std::string& comp, int d) {
    g.init(name + ".g", comp, Mat(1, d, 1.0));
    b.init(name + ".b", comp, Mat(1, d));
}

void init_adapter(Adapter& ad, const std::string& name, int d_model, int rank, Rng& rng) {
    ad.active = true;
    ad.A.init(name + ".A", "adapters", Mat::randn(d_model, rank, kInitStd, rng));
    ad.B.init(name + ".B", "adapters", Mat(rank, d_model));  // zero: exact no-op at init
}

// x(seq,d) * W + b, plus the adapter path when present.
Var projected(VarCache& c, const Var& x, Tensor& w, Tensor& b, Adapter& ad, double scaling) {
    Var out = ag::add_rowvec(ag::matmul(x, c.of(w)), c.of(b));
    if (ad.active)
        out = ag::add(out, ag::scale(ag::matmul(ag::matmul(x, c.of(ad.A)), c.of(ad.B)), scaling));
    return out;
}

int delim_row(Modality m, bool open) { return 2 * static_cast<int>(m) + (open ? 0 : 1); }

}  // namespace

Backbone Backbone::init(const ModelConfig& cfg) {
    if (cfg.d_model % cfg.n_heads != 0)
        fail(Err::InvalidConfig, "d_model must be divisible by n_heads");
    if (cfg.adapter_rank < 1) fail(Err::InvalidConfig, "adapter_rank must be >= 1");
    Backbone bb;
    bb.cfg = cfg;
    Rng rng(cfg.seed ^ 0xbacb0de12345ull);

    bb.delim_emb.init("delim_emb", "base", Mat::randn(8, cfg.d_model, kInitStd, rng));
    bb.signal_emb.init("signal_emb", "base", Mat::randn(4 * cfg.k_sig, cfg.d_model, kInitStd, rng));
    bb.pos_emb.init("pos_emb", "base", Mat::randn(cfg.max_seq_len, cfg.d_model, kInitStd, rng));
    for (int i = 0; i < 3; ++i)
        init_linear(bb.in_w[i], bb.in_b[i],
                    std::string("in_proj.") + modality_name(kStateModalities[i]), "base",
                    cfg.d_enc, cfg.d_model, rng);
    init_linear(bb.text_w, bb.text_b, "in_proj.text", "base", cfg.d_enc, cfg.d_model, rng);

    for (int l = 0; l < cfg.n_layers; ++l) {
        BackboneLayer layer;
        const std::string p = "layer" + std::to_string(l);
        init_ln(layer.ln1_g, layer.ln1_b, p + ".ln1", "base", cfg.d_model);
        init_linear(layer.wq, layer.bq, p + ".q", "base", cfg.d_model, cfg.d_model, rng);
        init_linear(layer.wk_, layer.bk, p + ".k", "base", cfg.d_model, cfg.d_model, rng);
        init_linear(layer.wv, layer.bv, p + ".v", "base", cfg.d_model, cfg.d_model, rng);
        init_linear(layer.wo, layer.bo, p + ".o", "base", cfg.d_model, cfg.d_model, rng);
        init_ln(layer.ln2_g, layer.ln2_b, p + ".ln2", "base", cfg.d_model);
        init_linear(layer.w1, layer.b1, p + ".mlp1", "base", cfg.d_model, cfg.ff(), rng);
        init_linear(layer.w2, layer.b2, p + ".mlp2", "base", cfg.ff(), cfg.d_model, rng);
        if (cfg.adapter_targets.find('q') != std::string::npos)
            init_adapter(layer.ad_q, p + ".ad_q", cfg.d_model, cfg.adapter_rank, rng);
        if (cfg.adapter_targets.find('k') != std::string::npos)
            init_adapter(layer.ad_k, p + ".ad_k", cfg.d_model, cfg.adapter_rank, rng);
        if (cfg.adapter_targets.find('v') != std::string::npos)
            init_adapter(layer.ad_v, p + ".ad_v", cfg.d_model, cfg.adapter_rank, rng);
        if (cfg.adapter_targets.find('o') != std::string::npos)
            init_adapter(layer.ad_o, p + ".ad_o", cfg.d_model, cfg.adapter_rank, rng);
        bb.layers.push_back(std::move(layer));
    }
    init_ln(bb.lnf_g, bb.lnf_b, "lnf", "base", cfg.d_model);
    return bb;
}

void Backbone::for_each_tensor(const std::function<void(Tensor&)>& fn) {
    fn(delim_emb);
    fn(signal_emb);
    fn(pos_emb);
    for (int i = 0; i < 3; ++i) {
        fn(in_w[i]);
        fn(in_b[i]);
    }
    fn(text_w);
    fn(text_b);
    for (auto& l : layers) {
        fn(l.ln1_g); fn(l.ln1_b);
        fn(l.wq); fn(l.bq); fn(l.wk_); fn(l.bk); fn(l.wv); fn(l.bv); fn(l.wo); fn(l.bo);
        fn(l.ln2_g); fn(l.ln2_b);
        fn(l.w1); fn(l.b1); fn(l.w2); fn(l.b2);
        for (Adapter* ad : {&l.ad_q, &l.ad_k, &l.ad_v, &l.ad_o})
            if (ad->active) {
                fn(ad->A);
                fn(ad->B);
            }
    }
    fn(lnf_g);
    fn(lnf_b);
}

void Backbone::for_each_tensor(const std::function<void(const Tensor&)>& fn) const {
    const_cast<Backbone*>(this)->for_each_tensor(
        [&fn](Tensor& t) { fn(static_cast<const Tensor&>(t)); });
}

ForwardOut backbone_forward(Backbone& bb, VarCache& c, const TokenStream& stream,
                            const std::vector<Var>* context_override) {
    const auto spans = locate_signal_spans(stream);  // validates the stream
    const ModelConfig& cfg = bb.cfg;

    // Count context rows and check the override matches.
    int n_ctx = 0;
    for (const auto& t : stream.tokens)
        if (t.kind == Token::Kind::Context) ++n_ctx;
    if (context_override) {
        int rows = 0;
        for (const auto& v : *context_override) rows += v->val.rows;
        if (rows != n_ctx)
            fail(Err::DimensionMismatch, "context override row count != context token count");
    }

    std::vector<Var> rows;
    rows.reserve(stream.tokens.size());
    if (context_override) {
        for (const auto& v : *context_override) rows.push_back(v);
    }
    int suffix_len = 0;
    for (const auto& t : stream.tokens) {
        switch (t.kind) {
            case Token::Kind::Context:
                if (!context_override) rows.push_back(ag::constant_row(t.payload));
                break;
            case Token::Kind::Open:
            case Token::Kind::Close: {
                const int r = delim_row(t.modality, t.kind == Token::Kind::Open);
                rows.push_back(ag::slice_rows(c.of(bb.delim_emb), r, r + 1));
                ++suffix_len;
                break;
            }
            case Token::Kind::Payload: {
                if (static_cast<int>(t.payload.size()) != cfg.d_enc)
                    fail(Err::DimensionMismatch, "payload dim != d_enc");
                const int mi = static_cast<int>(t.modality);
                rows.push_back(ag::add_rowvec(
                    ag::matmul(ag::constant_row(t.payload), c.of(bb.in_w[mi])), c.of(bb.in_b[mi])));
                ++suffix_len;
                break;
            }
            case Token::Kind::ActionText: {
                if (static_cast<int>(t.payload.size()) != cfg.d_enc)
                    fail(Err::DimensionMismatch, "action embedding dim != d_enc");
                rows.push_back(ag::add_rowvec(
                    ag::matmul(ag::constant_row(t.payload), c.of(bb.text_w)), c.of(bb.text_b)));
                ++suffix_len;
                break;
            }
            case Token::Kind::Signal: {
                const int r = static_cast<int>(t.modality) * cfg.k_sig + t.signal_index;
                rows.push_back(ag::slice_rows(c.of(bb.signal_emb), r, r + 1));
                ++suffix_len;
                break;
            }
        }
    }
    if (suffix_len > cfg.max_seq_len)
        fail(Err::InvalidConfig, "sequence exceeds max_seq_len");

    Var x = ag::concat_rows(rows);
    // Learned absolute positions on everything except context tokens.
    Var pos_pad;
    if (n_ctx > 0) {
        pos_pad = ag::concat_rows({ag::constant(Mat(n_ctx, cfg.d_model)),
                                   ag::slice_rows(c.of(bb.pos_emb), 0, suffix_len)});
    } else {
        pos_pad = ag::slice_rows(c.of(bb.pos_emb), 0, suffix_len);
    }
    Var h = ag::add(x, pos_pad);

    const int dh = cfg.d_model / cfg.n_heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const double lora_scale = cfg.adapter_alpha / cfg.adapter_rank;

    for (auto& layer : bb.layers) {
        Var a_in = ag::layernorm_rows(h, c.of(layer.ln1_g), c.of(layer.ln1_b));
        Var q = projected(c, a_in, layer.wq, layer.bq, layer.ad_q, lora_scale);
        Var k = projected(c, a_in, layer.wk_, layer.bk, layer.ad_k, lora_scale);
        Var v = projected(c, a_in, layer.wv, layer.bv, layer.ad_v, lora_scale);
        std::vector<Var> heads;
        heads.reserve(cfg.n_heads);
        for (int hd = 0; hd < cfg.n_heads; ++hd) {
            Var qh = ag::slice_cols(q, hd * dh, (hd + 1) * dh);
            Var kh = ag::slice_cols(k, hd * dh, (hd + 1) * dh);
            Var vh = ag::slice_cols(v, hd * dh, (hd + 1) * dh);
            Var p = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), att_scale), true);
            heads.push_back(ag::matmul(p, vh));
        }
        Var attn = ag::concat_cols(heads);
        Var o = projected(c, attn, layer.wo, layer.bo, layer.ad_o, lora_scale);
        h = ag::add(h, o);
        Var m_in = ag::layernorm_rows(h, c.of(layer.ln2_g), c.of(layer.ln2_b));
        Var f = ag::add_rowvec(ag::matmul(m_in, c.of(layer.w1)), c.of(layer.b1));
        f = ag::gelu(f);
        f = ag::add_rowvec(ag::matmul(f, c.of(layer.w2)), c.of(layer.b2));
        h = ag::add(h, f);
    }
    Var out = ag::layernorm_rows(h, c.of(bb.lnf_g), c.of(bb.lnf_b));
    return ForwardOut{out, spans};
}

Mat forward_values(Backbone& bb, const TokenStream& stream) {
    VarCache cache;
    cache.inference = true;
    return backbone_forward(bb, cache, stream).hidden->val;
}

std::map<Modality, Var> predict_transition(Backbone& bb, VarCache& cache,
                                           const TokenStream& stream,
                                           const std::vector<Var>* context_override) {
    ForwardOut fwd = backbone_forward(bb, cache, stream, context_override);
    std::map<Modality, Var> out;
    for (const auto& [m, span] : fwd.spans)
        out[m] = ag::slice_rows(fwd.hidden, span.start, span.end);
    return out;
}

}  // namespace wk
