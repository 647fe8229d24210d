// worldkit CLI: dataset generation, training, tuning, evaluation, and
// instruction synthesis over a single TOML-style config file. Every
// subcommand writes its artifacts under <out_dir>/<config-hash>/.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <thread>

#include "wk/accept.hpp"
#include "wk/config.hpp"
#include "wk/dataset_io.hpp"
#include "wk/evalbench.hpp"
#include "wk/provider.hpp"
#include "wk/synthesis.hpp"

namespace fs = std::filesystem;
using namespace wk;

namespace {

int exit_code_for(Err kind) {
    switch (kind) {
        case Err::ConfigError:
        case Err::InvalidConfig:
        case Err::UnknownComponent:
        case Err::EpochOutOfRange:
        case Err::EmptySet:
        case Err::EmptyRequest:
            return 2;
        case Err::NonFiniteLoss:
            return 4;
        case Err::ProviderError:
        case Err::UnparseablePlan:
            return 5;
        default:
            return 3;  // data errors
    }
}

struct RunPaths {
    std::string dir;
    std::string world() const { return dir + "/world.json"; }
    std::string data(const std::string& role) const { return dir + "/data/" + role + ".jsonl"; }
    std::string manifest(const std::string& role) const {
        return dir + "/data/" + role + ".manifest.json";
    }
    std::string sidecar(const std::string& role) const {
        return dir + "/data/" + role + ".sidecar.jsonl";
    }
    std::string kb(const std::string& scenario) const {
        return dir + "/kb/" + scenario + ".jsonl";
    }
    std::string ckpt(const std::string& which) const { return dir + "/ckpt/" + which + ".json"; }
    std::string report(const std::string& which) const { return dir + "/reports/" + which; }
};

struct Ctx {
    RunConfig cfg;
    RunPaths paths;
};

Ctx make_ctx(const std::string& config_path) {
    Ctx ctx;
    ctx.cfg = load_config(config_path);
    ctx.paths.dir = ctx.cfg.out_dir + "/" + config_hash(ctx.cfg);
    fs::create_directories(ctx.paths.dir);
    atomic_write(ctx.paths.dir + "/config.canonical", canonical_config(ctx.cfg));
    return ctx;
}

WorldGenConfig world_cfg_of(const RunConfig& cfg) {
    WorldGenConfig wc;
    wc.latent_dim = cfg.world_latent_dim;
    wc.d_enc = cfg.world_d_enc;
    wc.n_actions = cfg.world_actions;
    wc.n_scenarios = cfg.world_scenarios;
    wc.n_modalities = cfg.world_modalities;
    wc.bow_dim = cfg.world_bow_dim;
    wc.esoteric_fraction = cfg.world_esoteric_fraction;
    wc.squash = cfg.world_squash == "identity" ? Squash::identity : Squash::tanh_;
    wc.private_dims = cfg.world_private_dims;
    wc.private_coupling = cfg.world_private_coupling;
    return wc;
}

WorldSpec ensure_world(const Ctx& ctx) {
    if (fs::exists(ctx.paths.world())) return read_world_json(ctx.paths.world());
    WorldSpec world = gen_world(ctx.cfg.seed, world_cfg_of(ctx.cfg));
    write_world_json(ctx.paths.world(), world);
    return world;
}

DatasetGenConfig data_cfg_of(const RunConfig& cfg, const DataSection& sec) {
    DatasetGenConfig dc;
    dc.n_episodes = sec.episodes;
    dc.episode_len = sec.episode_len;
    dc.menu.mode = sec.menu;
    if (sec.esoteric == "exclude")
        dc.esoteric_mode = EsotericMode::exclude;
    else if (sec.esoteric == "include")
        dc.esoteric_mode = EsotericMode::include;
    else if (sec.esoteric == "only")
        dc.esoteric_mode = EsotericMode::only;
    else
        fail(Err::ConfigError, "bad esoteric mode: " + sec.esoteric);
    dc.esoteric_prob = sec.esoteric_prob;
    dc.seed = cfg.seed + sec.seed_offset;
    return dc;
}

const DataSection& section_of(const RunConfig& cfg, const std::string& role) {
    if (role == "pretrain") return cfg.pretrain_data;
    if (role == "tune") return cfg.tune_data;
    if (role == "test") return cfg.test_data;
    if (role == "episodes") return cfg.episode_data;
    fail(Err::ConfigError, "unknown data role: " + role);
}

void gen_one_dataset(const Ctx& ctx, const WorldSpec& world, const std::string& role) {
    const Manifest man =
        gen_dataset(world, data_cfg_of(ctx.cfg, section_of(ctx.cfg, role)), ctx.paths.data(role),
                    ctx.paths.manifest(role), ctx.paths.sidecar(role));
    std::printf("%s: %d episodes, %d samples -> %s\n", role.c_str(), man.n_episodes,
                man.n_samples, ctx.paths.data(role).c_str());
}

std::vector<Episode> load_role(const Ctx& ctx, const WorldSpec& world, const std::string& role) {
    if (!fs::exists(ctx.paths.data(role)))
        fail(Err::DataError, "missing dataset " + ctx.paths.data(role) + " (run gen-data)");
    return read_dataset_jsonl(ctx.paths.data(role), world);
}

std::vector<TransitionSample> flatten(const std::vector<Episode>& eps) {
    std::vector<TransitionSample> out;
    for (const auto& ep : eps)
        for (const auto& s : ep.samples) out.push_back(s);
    return out;
}

ModelConfig model_cfg_of(const RunConfig& cfg) {
    ModelConfig mc;
    mc.d_model = cfg.d_model;
    mc.n_layers = cfg.n_layers;
    mc.n_heads = cfg.n_heads;
    mc.k_sig = cfg.k_sig;
    mc.d_enc = cfg.world_d_enc;
    mc.d_ff = cfg.d_ff;
    mc.max_seq_len = cfg.max_seq_len;
    mc.adapter_rank = cfg.adapter_rank;
    mc.adapter_alpha = cfg.adapter_alpha;
    mc.adapter_targets = cfg.adapter_targets;
    mc.seed = cfg.seed;
    return mc;
}

ReflectorConfig reflector_cfg_of(const RunConfig& cfg) {
    ReflectorConfig rc;
    rc.n_queries = cfg.reflector_queries;
    rc.n_layers = cfg.reflector_layers;
    rc.n_heads = cfg.reflector_heads;
    return rc;
}

TrainConfig train_cfg_of(const RunConfig& cfg) {
    TrainConfig tc;
    tc.batch_size = cfg.train_batch;
    tc.steps_per_epoch = cfg.steps_per_epoch;
    tc.schedule.stage_epochs = cfg.stage_epochs;
    tc.schedule.total_epochs = cfg.total_epochs;
    tc.curriculum = cfg.train_schedule != "naive";
    tc.loss = cfg.train_loss == "mse" ? LossKind::mse : LossKind::one_minus_cosine;
    tc.render_loss_weight = cfg.render_loss_weight;
    tc.adam.lr = cfg.train_lr;
    tc.warmup_steps = cfg.train_warmup;
    tc.lr_min_ratio = cfg.train_lr_floor;
    tc.seed = cfg.seed;
    return tc;
}

std::map<std::string, KnowledgeBase> build_kbs(const Ctx& ctx, const WorldSpec& world) {
    DatasetGenConfig dc = data_cfg_of(ctx.cfg, ctx.cfg.tune_data);
    dc.seed = ctx.cfg.seed + ctx.cfg.kb_seed_offset;
    dc.n_episodes = std::max(1, ctx.cfg.kb_per_scenario * ctx.cfg.world_scenarios / 3 + 1);
    auto flat = gen_episodes(world, dc).flat();
    std::map<std::string, std::vector<TransitionSample>> per;
    for (auto& s : flat) per[s.scenario].push_back(s);
    std::map<std::string, KnowledgeBase> kbs;
    for (auto& [scen, vec] : per) {
        vec.resize(std::min<size_t>(vec.size(), static_cast<size_t>(ctx.cfg.kb_per_scenario)));
        kbs[scen] = kb_build(vec, scen);
    }
    return kbs;
}

std::map<std::string, KnowledgeBase> load_or_build_kbs(const Ctx& ctx, const WorldSpec& world) {
    std::map<std::string, KnowledgeBase> kbs;
    bool any = false;
    for (const auto& scen : world.scenarios)
        if (fs::exists(ctx.paths.kb(scen))) {
            kbs[scen] = read_kb_jsonl(ctx.paths.kb(scen), world);
            kbs[scen].scenario = scen;
            any = true;
        }
    if (any) return kbs;
    kbs = build_kbs(ctx, world);
    for (const auto& [scen, kb] : kbs) write_kb_jsonl(ctx.paths.kb(scen), kb);
    return kbs;
}

std::vector<Variant> parse_variants(const std::string& csv) {
    std::vector<Variant> out;
    size_t pos = 0;
    while (pos < csv.size()) {
        size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        out.push_back(variant_from_name(csv.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

std::vector<int> parse_lengths(const std::string& csv) {
    std::vector<int> out;
    size_t pos = 0;
    while (pos < csv.size()) {
        size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        out.push_back(std::stoi(csv.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

std::unique_ptr<ProviderClient> make_provider(const Ctx& ctx, const WorldSpec& world,
                                              const std::string& override_name, AuditLog* audit) {
    const std::string which = override_name.empty() ? ctx.cfg.provider : override_name;
    if (which == "mock") {
        std::vector<std::string> actions;
        for (const auto& a : world.actions)
            if (!a.esoteric) actions.push_back(a.text);
        return std::make_unique<MockProvider>(ctx.cfg.seed, actions, 3);
    }
    if (which == "http") {
        HttpProviderConfig hc;
        hc.host = ctx.cfg.provider_host;
        hc.port = ctx.cfg.provider_port;
        hc.path = ctx.cfg.provider_path;
        hc.api_key_env = ctx.cfg.provider_key_env;
        hc.max_retries = ctx.cfg.provider_retries;
        return std::make_unique<HttpProvider>(hc, audit);
    }
    fail(Err::ConfigError, "unknown provider: " + which);
}

// ----------------------------------------------------------- subcommands

int cmd_train(const Ctx& ctx) {
    WorldSpec world = ensure_world(ctx);
    if (!fs::exists(ctx.paths.data("pretrain"))) gen_one_dataset(ctx, world, "pretrain");
    const auto data = flatten(load_role(ctx, world, "pretrain"));
    WorldModel model = WorldModel::init(model_cfg_of(ctx.cfg), reflector_cfg_of(ctx.cfg));
    const TrainConfig tc = train_cfg_of(ctx.cfg);
    LossCurve curve = pretrain(model, data, tc);
    save_checkpoint(model, ctx.paths.ckpt("pretrained"));
    atomic_write(ctx.paths.dir + "/losscurve_pretrain.csv", losscurve_csv(curve));
    std::printf("trained %d steps; final multiple_crossmodal loss %.4f -> %s\n",
                tc.total_steps(),
                curve.final_loss(CompositionClass::multiple_crossmodal),
                ctx.paths.ckpt("pretrained").c_str());
    return 0;
}

int cmd_tune(const Ctx& ctx) {
    WorldSpec world = ensure_world(ctx);
    if (!fs::exists(ctx.paths.ckpt("pretrained")))
        fail(Err::DataError, "missing pretrained checkpoint (run train)");
    WorldModel model = load_checkpoint(ctx.paths.ckpt("pretrained"));
    if (!fs::exists(ctx.paths.data("tune"))) gen_one_dataset(ctx, world, "tune");
    if (!fs::exists(ctx.paths.data("episodes"))) gen_one_dataset(ctx, world, "episodes");
    const auto tune_flat = flatten(load_role(ctx, world, "tune"));
    const auto episodes = load_role(ctx, world, "episodes");
    const auto kbs = load_or_build_kbs(ctx, world);

    TuneConfig ucfg;
    ucfg.batch_size = ctx.cfg.tune_batch;
    ucfg.steps = ctx.cfg.tune_steps;
    ucfg.adam.lr = ctx.cfg.tune_lr;
    ucfg.retrieval_k = ctx.cfg.tune_retrieval_k;
    ucfg.memory_fraction = ctx.cfg.tune_memory_fraction;
    ucfg.seed = ctx.cfg.seed + 1;
    LossCurve curve = cognitive_tune(model, tune_flat, episodes, kbs, ucfg);
    save_checkpoint(model, ctx.paths.ckpt("tuned"));
    atomic_write(ctx.paths.dir + "/losscurve_tune.csv", losscurve_csv(curve));
    std::printf("tuned reflector for %d steps -> %s\n", ucfg.steps,
                ctx.paths.ckpt("tuned").c_str());
    return 0;
}

WorldModel load_model_for_eval(const Ctx& ctx, const std::string& which) {
    const std::string name = which.empty() ? "auto" : which;
    if (name == "pretrained" || (name == "auto" && !fs::exists(ctx.paths.ckpt("tuned")))) {
        if (!fs::exists(ctx.paths.ckpt("pretrained")))
            fail(Err::DataError, "no checkpoint in run dir (run train)");
        return load_checkpoint(ctx.paths.ckpt("pretrained"));
    }
    return load_checkpoint(ctx.paths.ckpt("tuned"));
}

int cmd_eval_matrix(const Ctx& ctx, const std::string& which_ckpt, bool compare_paper) {
    WorldSpec world = ensure_world(ctx);
    WorldModel model = load_model_for_eval(ctx, which_ckpt);
    if (!fs::exists(ctx.paths.data("test"))) gen_one_dataset(ctx, world, "test");
    const auto test = flatten(load_role(ctx, world, "test"));
    const auto kbs = load_or_build_kbs(ctx, world);

    std::set<uint64_t> train_hashes;
    if (fs::exists(ctx.paths.data("pretrain")))
        for (const auto& s : flatten(load_role(ctx, world, "pretrain")))
            train_hashes.insert(sample_content_hash(s));

    ModelPredictor mp(model);
    MatrixEvalConfig mcfg;
    mcfg.variants = parse_variants(ctx.cfg.eval_variants);
    mcfg.retrieval_k = ctx.cfg.tune_retrieval_k;
    mcfg.config_hash = config_hash(ctx.cfg);
    mcfg.seed = ctx.cfg.seed;
    mcfg.train_hashes = train_hashes;
    EvalReport rep = eval_matrix(mp, model, test, kbs, mcfg);
    write_report(rep, ctx.paths.report("matrix"));
    std::printf("%s", report_markdown(rep, compare_paper).c_str());
    return 0;
}

int cmd_eval_seq(const Ctx& ctx, const std::string& which_ckpt, bool compare_paper) {
    WorldSpec world = ensure_world(ctx);
    WorldModel model = load_model_for_eval(ctx, which_ckpt);
    if (!fs::exists(ctx.paths.data("episodes"))) gen_one_dataset(ctx, world, "episodes");
    const auto episodes = load_role(ctx, world, "episodes");

    ModelPredictor mp(model);
    SequenceEvalConfig scfg;
    scfg.variants = parse_variants(ctx.cfg.eval_seq_variants);
    scfg.lengths = parse_lengths(ctx.cfg.eval_lengths);
    scfg.config_hash = config_hash(ctx.cfg);
    scfg.seed = ctx.cfg.seed;
    EvalReport rep = eval_sequences(mp, model, episodes, scfg);
    write_report(rep, ctx.paths.report("sequences"));
    std::printf("%s", report_markdown(rep, compare_paper).c_str());
    return 0;
}

int cmd_synthesize(const Ctx& ctx, const std::string& provider_override) {
    WorldSpec world = ensure_world(ctx);
    WorldModel model = load_model_for_eval(ctx, "auto");
    AuditLog audit(ctx.paths.dir + "/provider_audit.jsonl");
    auto provider = make_provider(ctx, world, provider_override, &audit);

    SynthesisRunConfig scfg;
    scfg.seed_pool = ctx.cfg.synth_seed_pool;
    scfg.target_pool = ctx.cfg.synth_target_pool;
    scfg.rouge_threshold = ctx.cfg.synth_rouge_threshold;
    scfg.seed = ctx.cfg.seed;
    scfg.completion.memory_horizon = ctx.cfg.synth_memory_horizon;
    InstructionPool pool = synthesize_pool(*provider, model, world, scfg, &audit);
    write_pool_jsonl(ctx.paths.dir + "/pool.jsonl", pool);
    std::printf("pool of %zu instructions -> %s\n", pool.size(),
                (ctx.paths.dir + "/pool.jsonl").c_str());
    return 0;
}

int cmd_grad_check(const Ctx& ctx) {
    if (ctx.cfg.d_model > 32)
        fail(Err::ConfigError, "grad-check needs model.d_model <= 32 (finite differences)");
    WorldSpec world = ensure_world(ctx);
    DatasetGenConfig dc = data_cfg_of(ctx.cfg, ctx.cfg.test_data);
    dc.n_episodes = 2;
    dc.episode_len = 3;
    const auto probe = gen_episodes(world, dc).flat();
    WorldModel model = WorldModel::init(model_cfg_of(ctx.cfg), reflector_cfg_of(ctx.cfg));
    GradCheckReport rep = grad_check(
        model, {probe[0], probe[1]},
        {"base", "adapters", "heads_unified", "heads_render", "reflector"});
    std::printf("grad-check: max rel err %.3g over %d entries (worst %s[%d])\n", rep.max_rel_err,
                rep.entries_checked, rep.worst.tensor.c_str(), rep.worst.index);
    for (const auto& name : rep.skipped_frozen) std::printf("  skipped (frozen): %s\n", name.c_str());
    return rep.max_rel_err < 1e-4 ? 0 : 4;
}

int cmd_validate_data(const Ctx& ctx) {
    WorldSpec world = ensure_world(ctx);
    bool any = false;
    for (const std::string role : {"pretrain", "tune", "test", "episodes"}) {
        if (!fs::exists(ctx.paths.data(role))) continue;
        any = true;
        const auto eps = read_dataset_jsonl(ctx.paths.data(role), world);
        const Manifest man = read_manifest_json(ctx.paths.manifest(role));
        std::map<std::string, int> counts;
        int n = 0;
        for (const auto& ep : eps) {
            int last = -1;
            for (const auto& s : ep.samples) {
                if (s.step_index != last + 1)
                    fail(Err::DataError, role + ": non-contiguous steps in episode " +
                                             std::to_string(ep.episode_id));
                last = s.step_index;
                counts[s.scenario]++;
                ++n;
            }
        }
        if (n != man.n_samples || counts != man.per_scenario)
            fail(Err::DataError, role + ": dataset does not match its manifest");
        std::printf("%s: %d samples", role.c_str(), n);
        for (const auto& [scen, c] : counts) std::printf(" %s=%d", scen.c_str(), c);
        std::printf(" (manifest OK)\n");
    }
    if (!any) fail(Err::DataError, "no datasets in run dir (run gen-data)");
    return 0;
}

int cmd_repro(const Ctx& ctx, int threads) {
    const auto results = wk::accept::run_all(threads, {});
    bool all = true;
    for (const auto& r : results) {
        std::printf("[%s] criterion-%d %s (%.1fs): %s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.seconds, r.detail.c_str());
        std::fflush(stdout);
        all = all && r.pass;
    }
    atomic_write(ctx.paths.dir + "/summary.json", wk::accept::summary_json(results));
    std::printf("summary -> %s\n", (ctx.paths.dir + "/summary.json").c_str());
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"worldkit: desk-scale any-to-any multimodal world model harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string which_data = "all";
    std::string which_ckpt;
    std::string provider_override;
    bool compare_paper = false;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 2;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run config file")->required();
    };

    auto* genw = app.add_subcommand("gen-world", "generate the synthetic world");
    add_config(genw);
    auto* gend = app.add_subcommand("gen-data", "generate datasets (pretrain/tune/test/episodes)");
    add_config(gend);
    gend->add_option("--which", which_data, "pretrain|tune|test|episodes|all");
    auto* train = app.add_subcommand("train", "progressive state-transition pretraining");
    add_config(train);
    auto* tune = app.add_subcommand("tune", "cognitive-augmented tuning (reflector only)");
    add_config(tune);
    auto* kbb = app.add_subcommand("kb-build", "build per-scenario knowledge bases");
    add_config(kbb);
    auto* evm = app.add_subcommand("eval-matrix", "8-task modality-combination evaluation");
    add_config(evm);
    evm->add_option("--ckpt", which_ckpt, "pretrained|tuned (default: tuned if present)");
    evm->add_flag("--compare-paper", compare_paper,
                  "print published full-scale reference scores alongside (not reproducible here)");
    auto* evs = app.add_subcommand("eval-seq", "long-sequence evaluation at lengths 1/3/5/7");
    add_config(evs);
    evs->add_option("--ckpt", which_ckpt, "pretrained|tuned (default: tuned if present)");
    evs->add_flag("--compare-paper", compare_paper,
                  "print published full-scale reference scores alongside (not reproducible here)");
    auto* syn = app.add_subcommand("synthesize", "grow the multimodal instruction pool");
    add_config(syn);
    syn->add_option("--provider", provider_override, "mock|http (overrides config)");
    auto* gc = app.add_subcommand("grad-check", "finite-difference gradient verification");
    add_config(gc);
    auto* val = app.add_subcommand("validate-data", "check datasets against their manifests");
    add_config(val);
    auto* rep = app.add_subcommand("repro", "run the full acceptance suite end to end");
    rep->add_option("--config", config_path, "run config file (optional; defaults used if absent)");
    rep->add_option("--threads", threads, "worker threads for seed sweeps");

    CLI11_PARSE(app, argc, argv);

    try {
        if (rep->parsed()) {
            Ctx ctx;
            if (!config_path.empty()) {
                ctx = make_ctx(config_path);
            } else {
                ctx.cfg = parse_config("[run]\nseed = 7\n");
                ctx.paths.dir = "runs/accept";
                fs::create_directories(ctx.paths.dir);
            }
            return cmd_repro(ctx, threads);
        }
        Ctx ctx = make_ctx(config_path);
        if (genw->parsed()) {
            ensure_world(ctx);
            std::printf("world -> %s\n", ctx.paths.world().c_str());
            return 0;
        }
        if (gend->parsed()) {
            WorldSpec world = ensure_world(ctx);
            if (which_data == "all") {
                for (const std::string role : {"pretrain", "tune", "test", "episodes"})
                    gen_one_dataset(ctx, world, role);
            } else {
                gen_one_dataset(ctx, world, which_data);
            }
            return 0;
        }
        if (train->parsed()) return cmd_train(ctx);
        if (tune->parsed()) return cmd_tune(ctx);
        if (kbb->parsed()) {
            WorldSpec world = ensure_world(ctx);
            const auto kbs = build_kbs(ctx, world);
            for (const auto& [scen, kb] : kbs) {
                write_kb_jsonl(ctx.paths.kb(scen), kb);
                std::printf("kb %s: %zu entries -> %s\n", scen.c_str(), kb.size(),
                            ctx.paths.kb(scen).c_str());
            }
            return 0;
        }
        if (evm->parsed()) return cmd_eval_matrix(ctx, which_ckpt, compare_paper);
        if (evs->parsed()) return cmd_eval_seq(ctx, which_ckpt, compare_paper);
        if (syn->parsed()) return cmd_synthesize(ctx, provider_override);
        if (gc->parsed()) return cmd_grad_check(ctx);
        if (val->parsed()) return cmd_validate_data(ctx);
    } catch (const Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", err_name(e.kind), e.what());
        return exit_code_for(e.kind);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
