#include "wk/synthworld.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wk/dataset_io.hpp"

namespace wk {

namespace {

// Fixed word pools for synthetic action/state text. First `bow_dim` words of
// the flattened list form the bag-of-words vocabulary.
const std::vector<std::string> kVerbs = {
    "stir",  "lift",   "fold",   "heat",  "pour",  "slice", "shake", "press",
    "rinse", "twist",  "scrub",  "drop",  "spin",  "wipe",  "carry", "tilt",
    "brush", "squeeze", "knead", "whisk", "scoop", "tap",   "flip",  "drag",
};

const std::vector<std::string> kNouns = {
    "pan",    "bowl",   "ladle",  "kettle", "board",  "jar",    "crate",  "rope",
    "wheel",  "lever",  "bucket", "cloth",  "valve",  "switch", "hinge",  "tray",
    "funnel", "basket", "broom",  "sponge", "bottle", "hammer", "pulley", "clamp",
};

const std::vector<std::string> kAdjectives = {
    "copper", "wooden", "heavy", "small",  "dusty", "bright", "narrow", "round",
    "steel",  "glass",  "worn",  "smooth", "deep",  "flat",   "wide",   "pale",
};

const std::vector<std::string> kPlaces = {
    "kitchen", "workshop", "garden", "cellar", "attic",  "yard",
    "bench",   "counter",  "shed",   "dock",   "porch",  "stall",
};

std::vector<std::string> build_vocab(int bow_dim) {
    std::vector<std::string> vocab;
    vocab.reserve(bow_dim);
    const std::vector<const std::vector<std::string>*> pools = {&kVerbs, &kNouns, &kAdjectives,
                                                                &kPlaces};
    size_t idx = 0;
    while (static_cast<int>(vocab.size()) < bow_dim) {
        const auto& pool = *pools[idx % pools.size()];
        const auto& w = pool[(idx / pools.size()) % pool.size()];
        if (std::find(vocab.begin(), vocab.end(), w) == vocab.end()) vocab.push_back(w);
        ++idx;
        if (idx > 4096) break;  // pools exhausted; vocab stays smaller
    }
    return vocab;
}

Mat bounded_dynamics(int n, double target_norm, Rng& rng) {
    Mat A = Mat::randn(n, n, 1.0 / std::sqrt(n), rng);
    const double s = spectral_norm(A);
    if (s > 1e-12) {
        const double k = target_norm / s;
        for (auto& x : A.a) x *= k;
    }
    return A;
}

// Dynamics for private-block worlds: the shared block evolves on its own
// and each private block is driven by (shared, itself) only. Private state
// never feeds back into the visible shared block, so a masked modality's
// block stays unobservable from the current state at every step.
Mat blocked_dynamics(int n, int shared_dims, int n_blocks, int block_dims, double target_norm,
                     double coupling, Rng& rng) {
    Mat A(n, n);
    Mat S = bounded_dynamics(shared_dims, target_norm, rng);
    for (int i = 0; i < shared_dims; ++i)
        for (int j = 0; j < shared_dims; ++j) A.at(i, j) = S.at(i, j);
    for (int b = 0; b < n_blocks; ++b) {
        const int lo = shared_dims + b * block_dims;
        // Norm-preserving private dynamics: the initial private state stays
        // recoverable across the whole episode instead of contracting away.
        Mat P = bounded_dynamics(block_dims, 1.0, rng);
        for (int i = 0; i < block_dims; ++i)
            for (int j = 0; j < block_dims; ++j) A.at(lo + i, lo + j) = P.at(i, j);
        for (int i = 0; i < block_dims; ++i)
            for (int j = 0; j < shared_dims; ++j)
                A.at(lo + i, j) = coupling / std::sqrt(shared_dims) * rng.normal();
    }
    return A;
}

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

const ActionSpec& WorldSpec::action(const std::string& name) const {
    for (const auto& a : actions)
        if (a.name == name) return a;
    fail(Err::UnknownAction, "unknown action: " + name);
}

std::vector<const ActionSpec*> WorldSpec::scenario_actions(const std::string& scenario,
                                                           bool include_esoteric) const {
    std::vector<const ActionSpec*> out;
    for (const auto& a : actions)
        if (a.scenario == scenario && (include_esoteric || !a.esoteric)) out.push_back(&a);
    return out;
}

bool WorldSpec::action_esoteric(const std::string& action_text) const {
    for (const auto& a : actions)
        if (a.text == action_text) return a.esoteric;
    fail(Err::UnknownAction, "no action with text: " + action_text);
}

WorldSpec gen_world(uint64_t seed, const WorldGenConfig& cfg) {
    if (cfg.latent_dim < 1 || cfg.d_enc < 1 || cfg.n_actions < 1 || cfg.n_scenarios < 1 ||
        cfg.n_modalities < 1 || cfg.n_modalities > 3 || cfg.bow_dim < 1)
        fail(Err::InvalidConfig, "gen_world: all sizes must be >= 1 (modalities <= 3)");
    if (cfg.d_enc < cfg.latent_dim)
        fail(Err::InvalidConfig, "gen_world: d_enc must be >= latent_dim for full-rank maps");
    if (cfg.private_dims < 0 ||
        cfg.private_dims * cfg.n_modalities >= cfg.latent_dim)
        fail(Err::InvalidConfig, "gen_world: private blocks must leave a shared block");

    WorldSpec spec;
    spec.latent_dim = cfg.latent_dim;
    spec.d_enc = cfg.d_enc;
    spec.seed = seed;
    spec.vocab = build_vocab(cfg.bow_dim);

    Rng root(seed ^ 0x9b1a6e7c3d5f2481ull);

    for (int s = 0; s < cfg.n_scenarios; ++s)
        spec.scenarios.push_back("scenario" + std::to_string(s));

    // Observation maps, canonical modality order. Layout with private
    // blocks: [shared | p_image | p_video | p_audio]; modality i's columns
    // for other modalities' blocks are zeroed.
    Rng obs_rng = root.fork("observe");
    const int shared_dims = cfg.latent_dim - cfg.private_dims * cfg.n_modalities;
    for (int i = 0; i < cfg.n_modalities; ++i) {
        ObservationMap om;
        om.M = Mat::randn(cfg.d_enc, cfg.latent_dim, 1.0 / std::sqrt(cfg.latent_dim), obs_rng);
        if (cfg.private_dims > 0) {
            for (int j = 0; j < cfg.n_modalities; ++j) {
                if (j == i) continue;
                const int lo = shared_dims + j * cfg.private_dims;
                for (int r = 0; r < cfg.d_enc; ++r)
                    for (int c = lo; c < lo + cfg.private_dims; ++c) om.M.at(r, c) = 0.0;
            }
        }
        om.c.resize(cfg.d_enc);
        for (auto& x : om.c) x = 0.1 * obs_rng.normal();
        om.squash = cfg.squash;
        spec.observations[kStateModalities[i]] = std::move(om);
    }

    // Text encoder.
    Rng txt_rng = root.fork("text");
    spec.text_encoder =
        Mat::randn(cfg.d_enc, static_cast<int>(spec.vocab.size()), 1.0, txt_rng);

    // Actions, partitioned across scenarios round-robin; the tail fraction
    // within each scenario is marked esoteric.
    Rng act_rng = root.fork("actions");
    const int per_scenario = cfg.n_actions / cfg.n_scenarios;
    for (int i = 0; i < cfg.n_actions; ++i) {
        ActionSpec a;
        a.name = "act" + std::to_string(i);
        const int scen = (per_scenario > 0) ? std::min(i / per_scenario, cfg.n_scenarios - 1)
                                            : i % cfg.n_scenarios;
        a.scenario = spec.scenarios[static_cast<size_t>(scen)];
        const int within = (per_scenario > 0) ? i % per_scenario : 0;
        const int n_in_scen = (per_scenario > 0) ? per_scenario : 1;
        a.esoteric = within >= n_in_scen - static_cast<int>(std::floor(
                                                n_in_scen * cfg.esoteric_fraction + 1e-9));
        const double target = 0.9 + 0.1 * act_rng.uniform();
        a.A = (cfg.private_dims > 0)
                  ? blocked_dynamics(cfg.latent_dim,
                                     cfg.latent_dim - cfg.private_dims * cfg.n_modalities,
                                     cfg.n_modalities, cfg.private_dims, target,
                                     cfg.private_coupling, act_rng)
                  : bounded_dynamics(cfg.latent_dim, target, act_rng);
        a.b.resize(cfg.latent_dim);
        // Esoteric actions get a larger offset so ignoring them is costly.
        const double off = a.esoteric ? 0.8 : 0.35;
        for (auto& x : a.b) x = off * act_rng.normal();
        const auto& verb = kVerbs[act_rng.uniform_int(static_cast<int>(kVerbs.size()))];
        const auto& adj =
            kAdjectives[act_rng.uniform_int(static_cast<int>(kAdjectives.size()))];
        const auto& noun = kNouns[act_rng.uniform_int(static_cast<int>(kNouns.size()))];
        a.text = verb + " the " + adj + " " + noun + " " + std::to_string(i);
        spec.actions.push_back(std::move(a));
    }
    return spec;
}

Vec step_latent(const WorldSpec& spec, const Vec& z, const std::string& action_name) {
    const ActionSpec& a = spec.action(action_name);
    if (static_cast<int>(z.size()) != spec.latent_dim)
        fail(Err::DimensionMismatch, "step_latent: latent dim mismatch");
    Vec out(spec.latent_dim, 0.0);
    for (int i = 0; i < spec.latent_dim; ++i) {
        double s = a.b[i];
        const double* row = a.A.row(i);
        for (int j = 0; j < spec.latent_dim; ++j) s += row[j] * z[j];
        out[i] = s;
    }
    return out;
}

Vec observe(const WorldSpec& spec, const Vec& z, Modality m) {
    auto it = spec.observations.find(m);
    if (it == spec.observations.end())
        fail(Err::UnknownModality, std::string("observe: no map for ") + modality_name(m));
    const ObservationMap& om = it->second;
    Vec out(spec.d_enc, 0.0);
    for (int i = 0; i < spec.d_enc; ++i) {
        double s = om.c[i];
        const double* row = om.M.row(i);
        for (int j = 0; j < spec.latent_dim; ++j) s += row[j] * z[j];
        out[i] = (om.squash == Squash::tanh_) ? std::tanh(s) : s;
    }
    return out;
}

WorldState observe_all(const WorldSpec& spec, const Vec& z) {
    WorldState st;
    for (const auto& [m, om] : spec.observations) st.modalities[m] = observe(spec, z, m);
    return st;
}

Vec embed_text(const WorldSpec& spec, const std::string& text) {
    const auto words = tokenize_words(text);
    if (words.empty()) fail(Err::ZeroVector, "embed_text: no tokens in text");
    Vec bow(spec.text_encoder.cols, 0.0);
    for (const auto& w : words) {
        auto it = std::find(spec.vocab.begin(), spec.vocab.end(), w);
        const size_t idx = (it != spec.vocab.end())
                               ? static_cast<size_t>(it - spec.vocab.begin())
                               : fnv1a(w) % bow.size();
        bow[idx] += 1.0;
    }
    Vec emb(spec.d_enc, 0.0);
    for (int i = 0; i < spec.d_enc; ++i) {
        double s = 0.0;
        const double* row = spec.text_encoder.row(i);
        for (size_t j = 0; j < bow.size(); ++j) s += row[j] * bow[j];
        emb[i] = s;
    }
    return normalize(emb);
}

ActionDesc make_action(const WorldSpec& spec, const std::string& action_name) {
    const ActionSpec& a = spec.action(action_name);
    return ActionDesc{a.text, embed_text(spec, a.text)};
}

Vec resolve_state_text(const WorldSpec& spec, const std::string& text) {
    const auto words = tokenize_words(text);
    uint64_t h = fnv1a_u64(spec.seed);
    for (const auto& w : words) h = fnv1a(w, h);
    Rng rng(h);
    Vec z(spec.latent_dim);
    for (auto& x : z) x = rng.normal();
    return z;
}

Vec invert_observation(const WorldSpec& spec, const Vec& e, Modality m) {
    auto it = spec.observations.find(m);
    if (it == spec.observations.end())
        fail(Err::UnknownModality, "invert_observation: unknown modality");
    const ObservationMap& om = it->second;
    // Undo squash, subtract bias, then solve min ||M z - y|| by normal equations.
    Vec y(spec.d_enc);
    for (int i = 0; i < spec.d_enc; ++i) {
        double v = e[i];
        if (om.squash == Squash::tanh_) {
            v = std::clamp(v, -1.0 + 1e-15, 1.0 - 1e-15);
            v = std::atanh(v);
        }
        y[i] = v - om.c[i];
    }
    Mat mty(spec.latent_dim, 1);
    for (int j = 0; j < spec.latent_dim; ++j) {
        double s = 0.0;
        for (int i = 0; i < spec.d_enc; ++i) s += om.M.at(i, j) * y[i];
        mty.at(j, 0) = s;
    }
    Mat mtm = matmul_tn(om.M, om.M);
    // Gaussian elimination with partial pivoting; mtm is SPD at these sizes.
    const int n = spec.latent_dim;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(mtm.at(i, k)) > std::fabs(mtm.at(piv, k))) piv = i;
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(mtm.at(k, j), mtm.at(piv, j));
            std::swap(mty.at(k, 0), mty.at(piv, 0));
        }
        const double d = mtm.at(k, k);
        for (int i = k + 1; i < n; ++i) {
            const double f = mtm.at(i, k) / d;
            if (f == 0.0) continue;
            for (int j = k; j < n; ++j) mtm.at(i, j) -= f * mtm.at(k, j);
            mty.at(i, 0) -= f * mty.at(k, 0);
        }
    }
    Vec z(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = mty.at(i, 0);
        for (int j = i + 1; j < n; ++j) s -= mtm.at(i, j) * z[j];
        z[i] = s / mtm.at(i, i);
    }
    return z;
}

GeneratedData gen_episodes(const WorldSpec& spec, const DatasetGenConfig& cfg) {
    if (cfg.episode_len < 2)
        fail(Err::InvalidConfig, "gen_episodes: episode_len must be >= 2 states");
    if (cfg.n_episodes < 1) fail(Err::InvalidConfig, "gen_episodes: n_episodes must be >= 1");
    if (cfg.menu.mode != "full" && cfg.menu.mode != "drop_one")
        fail(Err::InvalidConfig, "gen_episodes: unknown menu mode " + cfg.menu.mode);
    if (cfg.menu.mode == "drop_one" && spec.observations.size() < 2)
        fail(Err::InvalidConfig, "gen_episodes: drop_one menu needs >= 2 modalities");

    std::vector<std::string> scenarios;
    if (cfg.scenario_filter.empty())
        scenarios = spec.scenarios;
    else
        scenarios.push_back(cfg.scenario_filter);

    std::vector<Modality> mods;
    for (const auto& [m, om] : spec.observations) mods.push_back(m);

    GeneratedData data;
    Rng rng(cfg.seed ^ 0x7e1d3c5b9a2f4860ull);
    for (int e = 0; e < cfg.n_episodes; ++e) {
        Episode ep;
        ep.episode_id = e;
        ep.scenario = scenarios[static_cast<size_t>(e) % scenarios.size()];
        const auto regular = spec.scenario_actions(ep.scenario, false);
        std::vector<const ActionSpec*> esoteric;
        for (const auto* a : spec.scenario_actions(ep.scenario, true))
            if (a->esoteric) esoteric.push_back(a);

        Vec z(spec.latent_dim);
        for (auto& x : z) x = rng.normal();
        const int drop_offset = rng.uniform_int(static_cast<int>(mods.size()));

        for (int t = 0; t < cfg.episode_len - 1; ++t) {
            const ActionSpec* action = nullptr;
            switch (cfg.esoteric_mode) {
                case EsotericMode::exclude:
                    action = regular[rng.uniform_int(static_cast<int>(regular.size()))];
                    break;
                case EsotericMode::only:
                    if (esoteric.empty()) fail(Err::InvalidConfig, "no esoteric actions");
                    action = esoteric[rng.uniform_int(static_cast<int>(esoteric.size()))];
                    break;
                case EsotericMode::include: {
                    const bool eso = !esoteric.empty() && rng.uniform() < cfg.esoteric_prob;
                    const auto& pool = eso ? esoteric : regular;
                    action = pool[rng.uniform_int(static_cast<int>(pool.size()))];
                    break;
                }
            }
            const Vec z_next = step_latent(spec, z, action->name);

            TransitionSample s;
            s.episode_id = ep.episode_id;
            s.step_index = t;
            s.scenario = ep.scenario;
            s.action = make_action(spec, action->name);
            if (cfg.menu.mode == "drop_one") {
                const size_t dropped = static_cast<size_t>((t + drop_offset) % mods.size());
                for (size_t i = 0; i < mods.size(); ++i)
                    if (i != dropped) s.before.modalities[mods[i]] = observe(spec, z, mods[i]);
            } else {
                s.before = observe_all(spec, z);
            }
            s.after = observe_all(spec, z_next);
            data.sidecar[{ep.episode_id, t}] = SidecarEntry{z, z_next};
            ep.samples.push_back(std::move(s));
            z = z_next;
        }
        data.episodes.push_back(std::move(ep));
    }
    return data;
}

std::vector<TransitionSample> GeneratedData::flat() const {
    std::vector<TransitionSample> out;
    for (const auto& ep : episodes)
        for (const auto& s : ep.samples) out.push_back(s);
    return out;
}

Manifest gen_dataset(const WorldSpec& spec, const DatasetGenConfig& cfg,
                     const std::string& out_path_jsonl, const std::string& manifest_path,
                     const std::string& sidecar_path) {
    GeneratedData data = gen_episodes(spec, cfg);

    Manifest man;
    man.world_seed = spec.seed;
    man.data_seed = cfg.seed;
    man.n_episodes = cfg.n_episodes;
    man.episode_len = cfg.episode_len;
    man.menu_mode = cfg.menu.mode;
    man.esoteric_mode = cfg.esoteric_mode == EsotericMode::exclude   ? "exclude"
                        : cfg.esoteric_mode == EsotericMode::include ? "include"
                                                                     : "only";
    for (const auto& ep : data.episodes) {
        man.n_samples += static_cast<int>(ep.samples.size());
        man.per_scenario[ep.scenario] += static_cast<int>(ep.samples.size());
    }

    man.dataset_hash = write_dataset_jsonl(out_path_jsonl, data.episodes);
    write_sidecar_jsonl(sidecar_path, data.sidecar);
    write_manifest_json(manifest_path, man);
    return man;
}

}  // namespace wk
