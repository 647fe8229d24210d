#pragma once

#include <map>
#include <string>

#include "wk/common.hpp"

namespace wk {

// Run configuration: TOML-style `key = value` lines under [section]
// headers, '#' comments. Unknown sections or keys are rejected; every field
// is defaulted except run.seed. The config hash over the canonicalized
// form names the run directory.

struct DataSection {
    int episodes = 100;
    int episode_len = 4;  // states per episode
    std::string menu = "full";
    std::string esoteric = "exclude";  // exclude | include | only
    double esoteric_prob = 0.3;
    uint64_t seed_offset = 0;
};

struct RunConfig {
    // [run]
    uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = "runs";

    // [world]
    int world_latent_dim = 16;
    int world_d_enc = 64;
    int world_actions = 12;
    int world_scenarios = 2;
    int world_modalities = 3;
    int world_bow_dim = 96;
    double world_esoteric_fraction = 0.25;
    std::string world_squash = "tanh";
    int world_private_dims = 0;
    double world_private_coupling = 0.5;

    // [model]
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int k_sig = 4;
    int d_ff = 0;
    int max_seq_len = 192;
    int adapter_rank = 4;
    double adapter_alpha = 8.0;
    std::string adapter_targets = "qv";

    // [reflector]
    int reflector_queries = 4;
    int reflector_layers = 2;
    int reflector_heads = 4;

    // [data.pretrain] / [data.tune] / [data.test] / [data.episodes]
    DataSection pretrain_data{400, 4, "full", "exclude", 0.3, 100};
    DataSection tune_data{150, 4, "full", "include", 0.5, 200};
    DataSection test_data{25, 3, "full", "include", 0.5, 400};
    DataSection episode_data{200, 8, "drop_one", "exclude", 0.0, 600};

    // [curriculum]
    int stage_epochs = 4;
    int total_epochs = 16;

    // [train]
    int train_batch = 6;
    int steps_per_epoch = 120;
    double train_lr = 6e-3;
    int train_warmup = 300;
    double train_lr_floor = 0.1;
    std::string train_schedule = "curriculum";  // curriculum | naive
    std::string train_loss = "one_minus_cosine";
    double render_loss_weight = 1.0;

    // [tune]
    int tune_batch = 6;
    int tune_steps = 1500;
    double tune_lr = 5e-3;
    int tune_retrieval_k = 1;
    double tune_memory_fraction = 0.5;

    // [cognition]
    int kb_per_scenario = 50;
    uint64_t kb_seed_offset = 300;

    // [eval]
    std::string eval_lengths = "1,3,5,7";
    std::string eval_variants = "base,CK,RK";
    std::string eval_seq_variants = "base,CM,RM";

    // [synthesis]
    int synth_seed_pool = 50;
    int synth_target_pool = 200;
    double synth_rouge_threshold = 0.8;
    std::string provider = "mock";
    std::string provider_host = "127.0.0.1";
    int provider_port = 8080;
    std::string provider_path = "/v1/complete";
    std::string provider_key_env = "WORLDKIT_PROVIDER_KEY";
    int provider_retries = 3;
    double provider_temperature = 0.7;
    int provider_max_tokens = 256;
    int synth_memory_horizon = 5;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Sorted section.key=value dump; stable across field layout changes.
std::string canonical_config(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

std::string default_config_text();

}  // namespace wk
