#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "wk/core.hpp"
#include "wk/mat.hpp"

namespace wk {

// Token protocol consumed by the backbone:
//   [context tokens] [<MOD> payload </MOD> per input modality, canonical
//   order] [action text] [k_sig signal tokens per requested modality,
//   canonical order]
// Signal-position hidden states are decoded into target embedding spaces.

struct Token {
    enum class Kind { Context, Open, Close, Payload, ActionText, Signal };
    Kind kind;
    Modality modality = Modality::text;  // Open/Close/Payload/Signal
    int signal_index = 0;                // Signal: 0..k_sig-1
    Vec payload;                         // Context (d_model), Payload/ActionText (d_enc)
};

// Exactly n_queries rows of d_model; the reflector's compression contract.
struct ContextTokens {
    Mat tokens;  // n_queries x d_model
};

struct TokenStream {
    std::vector<Token> tokens;
    std::set<Modality> requested_outputs;
    int k_sig = 4;
};

TokenStream frame_input(const WorldState& state, const ActionDesc& action,
                        const std::vector<ContextTokens>& context,
                        const std::set<Modality>& requested, int k_sig);

// Description-conditioned variant: no state payloads, just text + signals.
TokenStream frame_description(const Vec& text_embedding, const std::set<Modality>& requested,
                              int k_sig);

// Raw-context variant used by the in-context (CK/CM) baselines: arbitrary
// d_model rows are prepended without reflection.
TokenStream frame_input_raw_context(const WorldState& state, const ActionDesc& action,
                                    const std::vector<Mat>& raw_context_rows,
                                    const std::set<Modality>& requested, int k_sig);

struct SignalSpan {
    int start = 0;
    int end = 0;  // exclusive; end - start == k_sig
};

// Validates the stream invariants and returns the signal ranges per
// requested modality. Throws MalformedStream on any violation.
std::map<Modality, SignalSpan> locate_signal_spans(const TokenStream& stream);

// Debug surface form, e.g. "<CTX> <VID> [*] </VID> act <SIG:image:0> ...".
std::string pretty_print(const TokenStream& stream);

}  // namespace wk
