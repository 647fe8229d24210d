#pragma once

#include <map>
#include <string>
#include <vector>

#include "wk/core.hpp"
#include "wk/mat.hpp"
#include "wk/rng.hpp"

namespace wk {

// Affine latent dynamics with squashed linear observations. Plays the role
// of reality and of the unified multimodal encoder: every dataset it emits
// has exact ground truth.

enum class Squash { tanh_, identity };

struct ActionSpec {
    std::string name;
    Mat A;  // latent_dim x latent_dim, spectral norm <= 1.02
    Vec b;  // latent_dim
    std::string text;  // full surface form, e.g. "whisk the copper bowl"
    std::string scenario;
    bool esoteric = false;  // held out of pretraining data
};

struct ObservationMap {
    Mat M;  // d_enc x latent_dim, full column rank
    Vec c;  // d_enc
    Squash squash = Squash::tanh_;
};

struct WorldSpec {
    int latent_dim = 16;
    int d_enc = 64;
    uint64_t seed = 0;
    std::vector<ActionSpec> actions;
    std::map<Modality, ObservationMap> observations;
    std::vector<std::string> vocab;  // bag-of-words vocabulary
    Mat text_encoder;                // d_enc x vocab size
    std::vector<std::string> scenarios;

    const ActionSpec& action(const std::string& name) const;
    std::vector<const ActionSpec*> scenario_actions(const std::string& scenario,
                                                    bool include_esoteric) const;
    bool action_esoteric(const std::string& action_text) const;
};

struct WorldGenConfig {
    int latent_dim = 16;
    int d_enc = 64;
    int n_actions = 12;
    int n_scenarios = 2;
    int n_modalities = 3;  // taken in canonical order from {image, video, audio}
    int bow_dim = 96;
    double esoteric_fraction = 0.25;
    Squash squash = Squash::tanh_;
    // When > 0, each modality is blind to the other modalities' private
    // latent blocks: modality i observes the shared block plus its own
    // private_dims coordinates. The union across modalities stays full
    // rank, so a state is only fully determined when every modality is
    // visible; masking one makes history genuinely informative.
    int private_dims = 0;
    // Drive strength from the shared block into private blocks. Smaller
    // values keep private trajectories dominated by their initial state.
    double private_coupling = 0.5;
};

WorldSpec gen_world(uint64_t seed, const WorldGenConfig& cfg);

// z' = A_a z + b_a, exactly.
Vec step_latent(const WorldSpec& spec, const Vec& z, const std::string& action_name);

// e = squash(M_m z + c_m).
Vec observe(const WorldSpec& spec, const Vec& z, Modality m);

WorldState observe_all(const WorldSpec& spec, const Vec& z);

// Normalized bag-of-words encoding; out-of-vocabulary tokens hash into
// buckets so any non-empty text gets a nonzero embedding.
Vec embed_text(const WorldSpec& spec, const std::string& text);

ActionDesc make_action(const WorldSpec& spec, const std::string& action_name);

// Deterministic text -> starting latent, used to ground instruction plans.
Vec resolve_state_text(const WorldSpec& spec, const std::string& text);

// Least-squares inversion of one modality back to latent space (sanity
// oracle for cross-modal claims; not used by any training path).
Vec invert_observation(const WorldSpec& spec, const Vec& e, Modality m);

// ------------------------------------------------------------ generation

enum class EsotericMode { exclude, include, only };

struct MenuSpec {
    // "full": all world modalities on both sides.
    // "drop_one": input state hides one modality, rotating per step;
    //             targets stay full.
    std::string mode = "full";
};

struct DatasetGenConfig {
    int n_episodes = 100;
    int episode_len = 4;  // number of states; transitions per episode = len-1
    MenuSpec menu;
    EsotericMode esoteric_mode = EsotericMode::exclude;
    double esoteric_prob = 0.3;  // chance per step when mode == include
    uint64_t seed = 0;
    std::string scenario_filter;  // empty = all scenarios
};

struct Episode {
    int64_t episode_id = 0;
    std::string scenario;
    std::vector<TransitionSample> samples;  // step_index 0..n-1, chained
};

struct SidecarEntry {
    Vec z_before;
    Vec z_after;
};

struct GeneratedData {
    std::vector<Episode> episodes;
    // keyed by (episode_id, step_index)
    std::map<std::pair<int64_t, int>, SidecarEntry> sidecar;

    std::vector<TransitionSample> flat() const;
};

GeneratedData gen_episodes(const WorldSpec& spec, const DatasetGenConfig& cfg);

struct Manifest {
    uint64_t world_seed = 0;
    uint64_t data_seed = 0;
    int n_episodes = 0;
    int episode_len = 0;
    int n_samples = 0;
    std::map<std::string, int> per_scenario;
    std::string menu_mode;
    std::string esoteric_mode;
    uint64_t dataset_hash = 0;  // fnv over the JSONL bytes
};

// Writes dataset JSONL + manifest JSON + latent sidecar JSONL (kept in a
// separate file so training code has no path to the ground truth).
Manifest gen_dataset(const WorldSpec& spec, const DatasetGenConfig& cfg,
                     const std::string& out_path_jsonl, const std::string& manifest_path,
                     const std::string& sidecar_path);

}  // namespace wk
