#include "wk/config.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "wk/dataset_io.hpp"

namespace wk {

namespace {

struct Field {
    enum class Type { u64, i32, f64, str } type;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        return std::stoull(v);
    } catch (...) {
        fail(Err::ConfigError, "bad integer for " + key + ": " + v);
    }
}

int parse_i32(const std::string& v, const std::string& key) {
    try {
        return std::stoi(v);
    } catch (...) {
        fail(Err::ConfigError, "bad integer for " + key + ": " + v);
    }
}

double parse_f64(const std::string& v, const std::string& key) {
    try {
        return std::stod(v);
    } catch (...) {
        fail(Err::ConfigError, "bad number for " + key + ": " + v);
    }
}

std::string strip_quotes(std::string v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

#define F_U64(key, field)                                                               \
    {key, Field{Field::Type::u64,                                                      \
                [](RunConfig& c, const std::string& v) { c.field = parse_u64(v, key); }, \
                [](const RunConfig& c) { return std::to_string(c.field); }}}
#define F_I32(key, field)                                                               \
    {key, Field{Field::Type::i32,                                                      \
                [](RunConfig& c, const std::string& v) { c.field = parse_i32(v, key); }, \
                [](const RunConfig& c) { return std::to_string(c.field); }}}
#define F_F64(key, field)                                                               \
    {key, Field{Field::Type::f64,                                                      \
                [](RunConfig& c, const std::string& v) { c.field = parse_f64(v, key); }, \
                [](const RunConfig& c) { return fmt17(c.field); }}}
#define F_STR(key, field)                                                                   \
    {key, Field{Field::Type::str,                                                          \
                [](RunConfig& c, const std::string& v) { c.field = strip_quotes(v); },      \
                [](const RunConfig& c) { return c.field; }}}

const std::map<std::string, Field>& registry() {
    static const std::map<std::string, Field> reg = {
        F_U64("run.seed", seed),
        F_STR("run.out_dir", out_dir),
        F_I32("world.latent_dim", world_latent_dim),
        F_I32("world.d_enc", world_d_enc),
        F_I32("world.actions", world_actions),
        F_I32("world.scenarios", world_scenarios),
        F_I32("world.modalities", world_modalities),
        F_I32("world.bow_dim", world_bow_dim),
        F_F64("world.esoteric_fraction", world_esoteric_fraction),
        F_STR("world.squash", world_squash),
        F_I32("world.private_dims", world_private_dims),
        F_F64("world.private_coupling", world_private_coupling),
        F_I32("model.d_model", d_model),
        F_I32("model.n_layers", n_layers),
        F_I32("model.n_heads", n_heads),
        F_I32("model.k_sig", k_sig),
        F_I32("model.d_ff", d_ff),
        F_I32("model.max_seq_len", max_seq_len),
        F_I32("model.adapter_rank", adapter_rank),
        F_F64("model.adapter_alpha", adapter_alpha),
        F_STR("model.adapter_targets", adapter_targets),
        F_I32("reflector.queries", reflector_queries),
        F_I32("reflector.layers", reflector_layers),
        F_I32("reflector.heads", reflector_heads),
        F_I32("data.pretrain.episodes", pretrain_data.episodes),
        F_I32("data.pretrain.episode_len", pretrain_data.episode_len),
        F_STR("data.pretrain.menu", pretrain_data.menu),
        F_STR("data.pretrain.esoteric", pretrain_data.esoteric),
        F_F64("data.pretrain.esoteric_prob", pretrain_data.esoteric_prob),
        F_U64("data.pretrain.seed_offset", pretrain_data.seed_offset),
        F_I32("data.tune.episodes", tune_data.episodes),
        F_I32("data.tune.episode_len", tune_data.episode_len),
        F_STR("data.tune.menu", tune_data.menu),
        F_STR("data.tune.esoteric", tune_data.esoteric),
        F_F64("data.tune.esoteric_prob", tune_data.esoteric_prob),
        F_U64("data.tune.seed_offset", tune_data.seed_offset),
        F_I32("data.test.episodes", test_data.episodes),
        F_I32("data.test.episode_len", test_data.episode_len),
        F_STR("data.test.menu", test_data.menu),
        F_STR("data.test.esoteric", test_data.esoteric),
        F_F64("data.test.esoteric_prob", test_data.esoteric_prob),
        F_U64("data.test.seed_offset", test_data.seed_offset),
        F_I32("data.episodes.episodes", episode_data.episodes),
        F_I32("data.episodes.episode_len", episode_data.episode_len),
        F_STR("data.episodes.menu", episode_data.menu),
        F_STR("data.episodes.esoteric", episode_data.esoteric),
        F_F64("data.episodes.esoteric_prob", episode_data.esoteric_prob),
        F_U64("data.episodes.seed_offset", episode_data.seed_offset),
        F_I32("curriculum.stage_epochs", stage_epochs),
        F_I32("curriculum.total_epochs", total_epochs),
        F_I32("train.batch", train_batch),
        F_I32("train.steps_per_epoch", steps_per_epoch),
        F_F64("train.lr", train_lr),
        F_I32("train.warmup", train_warmup),
        F_F64("train.lr_floor", train_lr_floor),
        F_STR("train.schedule", train_schedule),
        F_STR("train.loss", train_loss),
        F_F64("train.render_loss_weight", render_loss_weight),
        F_I32("tune.batch", tune_batch),
        F_I32("tune.steps", tune_steps),
        F_F64("tune.lr", tune_lr),
        F_I32("tune.retrieval_k", tune_retrieval_k),
        F_F64("tune.memory_fraction", tune_memory_fraction),
        F_I32("cognition.kb_per_scenario", kb_per_scenario),
        F_U64("cognition.kb_seed_offset", kb_seed_offset),
        F_STR("eval.lengths", eval_lengths),
        F_STR("eval.variants", eval_variants),
        F_STR("eval.seq_variants", eval_seq_variants),
        F_I32("synthesis.seed_pool", synth_seed_pool),
        F_I32("synthesis.target_pool", synth_target_pool),
        F_F64("synthesis.rouge_threshold", synth_rouge_threshold),
        F_STR("synthesis.provider", provider),
        F_STR("synthesis.provider_host", provider_host),
        F_I32("synthesis.provider_port", provider_port),
        F_STR("synthesis.provider_path", provider_path),
        F_STR("synthesis.provider_key_env", provider_key_env),
        F_I32("synthesis.provider_retries", provider_retries),
        F_F64("synthesis.provider_temperature", provider_temperature),
        F_I32("synthesis.provider_max_tokens", provider_max_tokens),
        F_I32("synthesis.memory_horizon", synth_memory_horizon),
    };
    return reg;
}

#undef F_U64
#undef F_I32
#undef F_F64
#undef F_STR

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::string section;
    size_t pos = 0;
    int lineno = 0;
    while (pos <= text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = trim(line.substr(0, hash_pos));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                fail(Err::ConfigError, "line " + std::to_string(lineno) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(Err::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        auto it = registry().find(full);
        if (it == registry().end())
            fail(Err::ConfigError, "unknown config key: " + full);
        it->second.set(cfg, value);
        if (full == "run.seed") cfg.seed_set = true;
    }
    if (!cfg.seed_set) fail(Err::ConfigError, "run.seed is mandatory");
    return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string canonical_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, field] : registry()) out += key + "=" + field.get(cfg) + "\n";
    return out;
}

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a(canonical_config(cfg))); }

std::string default_config_text() {
    return
        "# worldkit run configuration\n"
        "[run]\n"
        "seed = 7\n"
        "out_dir = \"runs\"\n"
        "\n"
        "[world]\n"
        "latent_dim = 16\n"
        "d_enc = 64\n"
        "actions = 12\n"
        "scenarios = 2\n"
        "esoteric_fraction = 0.25\n"
        "\n"
        "[model]\n"
        "d_model = 64\n"
        "n_layers = 2\n"
        "n_heads = 4\n"
        "k_sig = 4\n"
        "\n"
        "[curriculum]\n"
        "stage_epochs = 4\n"
        "total_epochs = 16\n"
        "\n"
        "[train]\n"
        "batch = 6\n"
        "steps_per_epoch = 120\n"
        "lr = 0.006\n"
        "schedule = \"curriculum\"\n"
        "\n"
        "[tune]\n"
        "steps = 1500\n"
        "lr = 0.005\n"
        "\n"
        "[synthesis]\n"
        "provider = \"mock\"\n";
}

}  // namespace wk
