#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "wk/common.hpp"

namespace wk {

// Canonical ordering: image < video < audio < text. Used wherever a
// deterministic modality order is needed.
enum class Modality : uint8_t { image = 0, video = 1, audio = 2, text = 3 };

// The modalities a world state may carry (text is excluded from states).
constexpr std::array<Modality, 3> kStateModalities{Modality::image, Modality::video,
                                                   Modality::audio};

const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);

// One world state: a set of modality-tagged embeddings in the unified
// feature space, plus an optional text description.
struct WorldState {
    std::map<Modality, Vec> modalities;  // ordered map => canonical iteration
    std::optional<std::string> text;

    bool empty() const { return modalities.empty(); }
    int d_enc() const { return modalities.empty() ? 0 : static_cast<int>(modalities.begin()->second.size()); }
};

struct ActionDesc {
    std::string text;
    Vec embedding;  // text-space encoding, dimension d_enc
};

// The atomic training/eval unit.
struct TransitionSample {
    WorldState before;
    ActionDesc action;
    WorldState after;
    std::string scenario;
    int64_t episode_id = 0;
    int step_index = 0;
};

// Checks the WorldState invariants (non-empty, no text key, uniform dims).
void validate_state(const WorldState& s);

// cos(a, b), clamped to [-1, 1]. Throws ZeroVector if either norm < 1e-12,
// DimensionMismatch on unequal sizes.
double cosine_similarity(const Vec& a, const Vec& b);

// a / ||a||, output norm 1 +- 1e-9. Throws ZeroVector below the degenerate
// threshold.
Vec normalize(const Vec& a);

// mean of normalized before-state embeddings (canonical modality order)
// concatenated with the normalized action embedding. Dimension 2*d_enc.
Vec condition_vector(const WorldState& state, const ActionDesc& action);

// Deterministic retrieval key: normalize(condition_vector(...)).
Vec unified_encode(const TransitionSample& sample);

// Content hash over the canonical serialization of a sample. Used for
// train/test/KB disjointness checks.
uint64_t sample_content_hash(const TransitionSample& s);

}  // namespace wk
