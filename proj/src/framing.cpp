#include "wk/framing.hpp"

#include <algorithm>

namespace wk {

namespace {

void append_body(TokenStream& out, const WorldState* state, const ActionDesc* action,
                 const Vec* text_embedding, const std::set<Modality>& requested, int k_sig) {
    if (requested.empty()) fail(Err::EmptyRequest, "frame: requested output set is empty");
    for (Modality m : requested)
        if (m == Modality::text) fail(Err::UnknownModality, "frame: text is not a target modality");

    if (state) {
        validate_state(*state);
        for (const auto& [m, e] : state->modalities) {
            out.tokens.push_back({Token::Kind::Open, m, 0, {}});
            out.tokens.push_back({Token::Kind::Payload, m, 0, e});
            out.tokens.push_back({Token::Kind::Close, m, 0, {}});
        }
    }
    if (action) {
        if (action->embedding.empty())
            fail(Err::DimensionMismatch, "frame: action embedding is empty");
        out.tokens.push_back({Token::Kind::ActionText, Modality::text, 0, action->embedding});
    } else if (text_embedding) {
        out.tokens.push_back({Token::Kind::ActionText, Modality::text, 0, *text_embedding});
    }
    for (Modality m : requested)
        for (int i = 0; i < k_sig; ++i) out.tokens.push_back({Token::Kind::Signal, m, i, {}});
    out.requested_outputs = requested;
    out.k_sig = k_sig;
}

}  // namespace

TokenStream frame_input(const WorldState& state, const ActionDesc& action,
                        const std::vector<ContextTokens>& context,
                        const std::set<Modality>& requested, int k_sig) {
    TokenStream out;
    for (const auto& block : context)
        for (int i = 0; i < block.tokens.rows; ++i)
            out.tokens.push_back({Token::Kind::Context, Modality::text, 0,
                                  Vec(block.tokens.row(i), block.tokens.row(i) + block.tokens.cols)});
    append_body(out, &state, &action, nullptr, requested, k_sig);
    return out;
}

TokenStream frame_description(const Vec& text_embedding, const std::set<Modality>& requested,
                              int k_sig) {
    TokenStream out;
    append_body(out, nullptr, nullptr, &text_embedding, requested, k_sig);
    return out;
}

TokenStream frame_input_raw_context(const WorldState& state, const ActionDesc& action,
                                    const std::vector<Mat>& raw_context_rows,
                                    const std::set<Modality>& requested, int k_sig) {
    TokenStream out;
    for (const auto& block : raw_context_rows)
        for (int i = 0; i < block.rows; ++i)
            out.tokens.push_back(
                {Token::Kind::Context, Modality::text, 0, Vec(block.row(i), block.row(i) + block.cols)});
    append_body(out, &state, &action, nullptr, requested, k_sig);
    return out;
}

std::map<Modality, SignalSpan> locate_signal_spans(const TokenStream& stream) {
    // Walk once, checking well-nestedness, context placement, and signal
    // contiguity as we go.
    bool seen_non_context = false;
    bool in_payload = false;
    Modality open_mod = Modality::text;
    int payloads_in_block = 0;
    std::map<Modality, SignalSpan> spans;
    Modality cur_sig = Modality::text;
    int cur_sig_next = -1;

    for (size_t i = 0; i < stream.tokens.size(); ++i) {
        const Token& t = stream.tokens[i];
        const bool is_signal = t.kind == Token::Kind::Signal;
        if (!is_signal && cur_sig_next > 0 && cur_sig_next < stream.k_sig)
            fail(Err::MalformedStream, "signal block interrupted");
        switch (t.kind) {
            case Token::Kind::Context:
                if (seen_non_context)
                    fail(Err::MalformedStream, "context token after non-context token");
                break;
            case Token::Kind::Open:
                seen_non_context = true;
                if (in_payload) fail(Err::MalformedStream, "nested modality delimiter");
                in_payload = true;
                open_mod = t.modality;
                payloads_in_block = 0;
                break;
            case Token::Kind::Payload:
                seen_non_context = true;
                if (!in_payload || t.modality != open_mod)
                    fail(Err::MalformedStream, "payload outside matching delimiters");
                ++payloads_in_block;
                break;
            case Token::Kind::Close:
                seen_non_context = true;
                if (!in_payload || t.modality != open_mod || payloads_in_block != 1)
                    fail(Err::MalformedStream, "unbalanced modality delimiters");
                in_payload = false;
                break;
            case Token::Kind::ActionText:
                seen_non_context = true;
                if (in_payload) fail(Err::MalformedStream, "action inside delimiters");
                break;
            case Token::Kind::Signal: {
                seen_non_context = true;
                if (in_payload) fail(Err::MalformedStream, "signal inside delimiters");
                if (cur_sig_next >= 1 && cur_sig_next < stream.k_sig) {
                    if (t.modality != cur_sig || t.signal_index != cur_sig_next)
                        fail(Err::MalformedStream, "signal indices not contiguous");
                    ++cur_sig_next;
                } else {
                    if (t.signal_index != 0)
                        fail(Err::MalformedStream, "signal block does not start at 0");
                    if (spans.count(t.modality))
                        fail(Err::MalformedStream, "duplicate signal block for modality");
                    cur_sig = t.modality;
                    cur_sig_next = 1;
                    spans[t.modality] = SignalSpan{static_cast<int>(i), 0};
                }
                if (cur_sig_next == stream.k_sig) {
                    spans[cur_sig].end = static_cast<int>(i) + 1;
                    cur_sig_next = 0;
                }
                break;
            }
        }
    }
    if (in_payload) fail(Err::MalformedStream, "unclosed modality delimiter");
    if (cur_sig_next > 0 && cur_sig_next < stream.k_sig)
        fail(Err::MalformedStream, "trailing incomplete signal block");

    for (Modality m : stream.requested_outputs) {
        auto it = spans.find(m);
        if (it == spans.end() || it->second.end - it->second.start != stream.k_sig)
            fail(Err::MalformedStream,
                 std::string("missing signal block for ") + modality_name(m));
    }
    if (spans.size() != stream.requested_outputs.size())
        fail(Err::MalformedStream, "signal block for unrequested modality");
    return spans;
}

std::string pretty_print(const TokenStream& stream) {
    std::string out;
    for (const auto& t : stream.tokens) {
        if (!out.empty()) out += " ";
        switch (t.kind) {
            case Token::Kind::Context: out += "<CTX>"; break;
            case Token::Kind::Open:
                out += std::string("<") + modality_name(t.modality) + ">";
                break;
            case Token::Kind::Close:
                out += std::string("</") + modality_name(t.modality) + ">";
                break;
            case Token::Kind::Payload: out += "[*]"; break;
            case Token::Kind::ActionText: out += "[action]"; break;
            case Token::Kind::Signal:
                out += std::string("<SIG:") + modality_name(t.modality) + ":" +
                       std::to_string(t.signal_index) + ">";
                break;
        }
    }
    return out;
}

}  // namespace wk
