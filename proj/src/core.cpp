#include "wk/core.hpp"

#include <cmath>

#include "wk/mat.hpp"

namespace wk {

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::image: return "image";
        case Modality::video: return "video";
        case Modality::audio: return "audio";
        case Modality::text: return "text";
    }
    return "?";
}

Modality modality_from_name(const std::string& name) {
    if (name == "image") return Modality::image;
    if (name == "video") return Modality::video;
    if (name == "audio") return Modality::audio;
    if (name == "text") return Modality::text;
    fail(Err::UnknownModality, "unknown modality: " + name);
}

void validate_state(const WorldState& s) {
    if (s.modalities.empty()) fail(Err::EmptyRequest, "world state has no modalities");
    size_t d = 0;
    for (const auto& [m, e] : s.modalities) {
        if (m == Modality::text) fail(Err::UnknownModality, "text is not a state modality");
        if (d == 0) d = e.size();
        if (e.size() != d) fail(Err::DimensionMismatch, "state embeddings disagree on d_enc");
    }
}

double cosine_similarity(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        fail(Err::DimensionMismatch, "cosine_similarity: " + std::to_string(a.size()) + " vs " +
                                         std::to_string(b.size()));
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na < 1e-12 || nb < 1e-12) fail(Err::ZeroVector, "cosine_similarity: degenerate embedding");
    double c = dot(a, b) / (na * nb);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return c;
}

Vec normalize(const Vec& a) {
    const double n = norm2(a);
    if (n < 1e-12) fail(Err::ZeroVector, "normalize: degenerate embedding");
    Vec out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] / n;
    return out;
}

Vec condition_vector(const WorldState& state, const ActionDesc& action) {
    validate_state(state);
    const size_t d = state.modalities.begin()->second.size();
    if (action.embedding.size() != d)
        fail(Err::DimensionMismatch, "condition_vector: action dim != d_enc");
    Vec mean(d, 0.0);
    for (const auto& [m, e] : state.modalities) {
        const Vec n = normalize(e);
        for (size_t i = 0; i < d; ++i) mean[i] += n[i];
    }
    const double inv = 1.0 / static_cast<double>(state.modalities.size());
    for (auto& x : mean) x *= inv;
    const Vec na = normalize(action.embedding);
    Vec out;
    out.reserve(2 * d);
    out.insert(out.end(), mean.begin(), mean.end());
    out.insert(out.end(), na.begin(), na.end());
    return out;
}

Vec unified_encode(const TransitionSample& sample) {
    return normalize(condition_vector(sample.before, sample.action));
}

static uint64_t hash_state(const WorldState& s, uint64_t h) {
    for (const auto& [m, e] : s.modalities) {
        h = fnv1a(modality_name(m), h);
        h = fnv1a_doubles(e.data(), e.size(), h);
    }
    if (s.text) h = fnv1a(*s.text, h);
    return h;
}

uint64_t sample_content_hash(const TransitionSample& s) {
    uint64_t h = kFnvOffset;
    h = fnv1a(s.scenario, h);
    h = fnv1a_u64(static_cast<uint64_t>(s.episode_id), h);
    h = fnv1a_u64(static_cast<uint64_t>(s.step_index), h);
    h = fnv1a(s.action.text, h);
    h = fnv1a_doubles(s.action.embedding.data(), s.action.embedding.size(), h);
    h = hash_state(s.before, h);
    h = hash_state(s.after, h);
    return h;
}

}  // namespace wk
