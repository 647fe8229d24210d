#pragma once

#include <functional>
#include <map>
#include <vector>

#include "wk/framing.hpp"
#include "wk/params.hpp"
#include "wk/rng.hpp"

namespace wk {

struct ModelConfig {
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int k_sig = 4;
    int d_enc = 64;
    int d_ff = 0;  // 0 => 4 * d_model
    int max_seq_len = 192;
    int adapter_rank = 4;
    double adapter_alpha = 8.0;
    std::string adapter_targets = "qv";  // any of q,k,v,o
    uint64_t seed = 1;

    int ff() const { return d_ff > 0 ? d_ff : 4 * d_model; }
};

// Low-rank adapter pair: delta W = A B * (alpha / rank), with B zero-init so
// a fresh adapter is an exact no-op.
struct Adapter {
    Tensor A;  // d_model x rank
    Tensor B;  // rank x d_model
    bool active = false;
};

struct BackboneLayer {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk_, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b;
    Tensor w1, b1, w2, b2;
    Adapter ad_q, ad_k, ad_v, ad_o;
};

// Small pre-LN causal transformer over TokenStreams. Signal/delimiter
// embeddings are learned per id; payloads enter through per-modality input
// projections; context tokens arrive as ready-made d_model rows and carry
// no positional encoding.
struct Backbone {
    ModelConfig cfg;
    Tensor delim_emb;   // 8 x d_model   (open/close x 4 modalities)
    Tensor signal_emb;  // 4*k_sig x d_model
    Tensor pos_emb;     // max_seq_len x d_model
    Tensor in_w[3], in_b[3];  // image/video/audio payload projections
    Tensor text_w, text_b;
    std::vector<BackboneLayer> layers;
    Tensor lnf_g, lnf_b;

    static Backbone init(const ModelConfig& cfg);

    void for_each_tensor(const std::function<void(Tensor&)>& fn);
    void for_each_tensor(const std::function<void(const Tensor&)>& fn) const;
};

struct ForwardOut {
    ag::Var hidden;  // seq_len x d_model, post final layernorm
    std::map<Modality, SignalSpan> spans;
};

// Causal forward pass. If context_override is non-null its blocks replace
// the values of the stream's Context tokens (row counts must match); this
// is how reflector gradients reach the loss.
ForwardOut backbone_forward(Backbone& bb, VarCache& cache, const TokenStream& stream,
                            const std::vector<ag::Var>* context_override = nullptr);

// Value-level convenience used by tests: returns the hidden matrix.
Mat forward_values(Backbone& bb, const TokenStream& stream);

// Slices the forward hiddens at each requested modality's signal span.
std::map<Modality, ag::Var> predict_transition(Backbone& bb, VarCache& cache,
                                               const TokenStream& stream,
                                               const std::vector<ag::Var>* context_override = nullptr);

}  // namespace wk
