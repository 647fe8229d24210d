#include "wk/synthesis.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "wk/cognition.hpp"
#include "wk/dataset_io.hpp"

namespace wk {

using nlohmann::json;

std::vector<std::string> rouge_tokens(const std::string& text) {
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

double rouge_l(const std::string& candidate, const std::string& reference) {
    const auto c = rouge_tokens(candidate);
    const auto r = rouge_tokens(reference);
    if (c.empty() || r.empty()) return 0.0;
    // LCS length via the classic DP table.
    std::vector<std::vector<int>> dp(c.size() + 1, std::vector<int>(r.size() + 1, 0));
    for (size_t i = 1; i <= c.size(); ++i)
        for (size_t j = 1; j <= r.size(); ++j)
            dp[i][j] = (c[i - 1] == r[j - 1]) ? dp[i - 1][j - 1] + 1
                                              : std::max(dp[i - 1][j], dp[i][j - 1]);
    const double lcs = dp[c.size()][r.size()];
    const double p = lcs / static_cast<double>(c.size());
    const double q = lcs / static_cast<double>(r.size());
    if (p + q == 0.0) return 0.0;
    return 2.0 * p * q / (p + q);
}

FilterDecision filter_and_add(InstructionPool& pool, InstructionRecord candidate,
                              double threshold) {
    if (candidate.text.empty()) fail(Err::InvalidConfig, "filter_and_add: empty candidate text");
    FilterDecision decision;
    for (const auto& rec : pool.records) {
        const double score = rouge_l(candidate.text, rec.text);
        if (score > decision.max_score) {
            decision.max_score = score;
            decision.nearest_id = rec.id;
        }
    }
    decision.accepted = !(decision.max_score > threshold);
    if (decision.accepted) pool.records.push_back(std::move(candidate));
    return decision;
}

std::vector<ProposalCandidate> propose_instructions(const InstructionPool& pool,
                                                    ProviderClient& provider, int n, Rng& rng,
                                                    AuditLog* audit) {
    if (pool.empty()) fail(Err::EmptyPool, "propose_instructions: empty pool");
    std::vector<ProposalCandidate> out;
    for (int i = 0; i < n; ++i) {
        // 8 in-context exemplars, uniform without replacement.
        const int want = std::min<int>(8, static_cast<int>(pool.size()));
        std::vector<size_t> idx(pool.size());
        for (size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        for (int k = 0; k < want; ++k) {
            const int j = k + rng.uniform_int(static_cast<int>(idx.size()) - k);
            std::swap(idx[static_cast<size_t>(k)], idx[static_cast<size_t>(j)]);
        }
        ProposalCandidate cand;
        std::string prompt = "TASK: propose\nWrite one new instruction in the style of these examples.\n";
        for (int k = 0; k < want; ++k) {
            const auto& rec = pool.records[idx[static_cast<size_t>(k)]];
            prompt += "EXAMPLE: " + rec.text + "\n";
            cand.provenance.in_context_ids.push_back(rec.id);
        }
        prompt += "NEW INSTRUCTION:";
        ProviderRequest req{prompt, 256, 0.7};
        cand.provenance.provider = provider.name();
        cand.provenance.request_hash = request_hash(req);
        cand.provenance.logical_time = audit ? audit->tick() : 0;
        cand.text = provider.complete(req);
        out.push_back(std::move(cand));
    }
    return out;
}

ExtractionPlan extract_plan(const std::string& instruction, ProviderClient& provider,
                            AuditLog* audit) {
    if (instruction.empty()) fail(Err::InvalidConfig, "extract_plan: empty instruction");
    (void)audit;
    ProviderRequest req{
        "TASK: extract\nReturn JSON {pattern, initial_state, actions, modalities}.\n"
        "INSTRUCTION: " +
            instruction,
        256, 0.0};
    const std::string raw = provider.complete(req);
    json j;
    try {
        j = json::parse(raw);
    } catch (const std::exception& e) {
        fail(Err::UnparseablePlan, std::string("plan is not valid JSON: ") + e.what());
    }
    ExtractionPlan plan;
    try {
        const std::string pattern = j.at("pattern").get<std::string>();
        if (pattern == "description_conditioned")
            plan.pattern = PlanPattern::description_conditioned;
        else if (pattern == "transition_conditioned")
            plan.pattern = PlanPattern::transition_conditioned;
        else
            fail(Err::UnparseablePlan, "unknown plan pattern: " + pattern);
        plan.initial_state_text = j.at("initial_state").get<std::string>();
        plan.actions = j.at("actions").get<std::vector<std::string>>();
        for (const auto& m : j.at("modalities").get<std::vector<std::string>>())
            plan.requested.insert(modality_from_name(m));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(Err::UnparseablePlan, std::string("plan fails schema validation: ") + e.what());
    }
    if (plan.pattern == PlanPattern::transition_conditioned && plan.actions.empty())
        fail(Err::UnparseablePlan, "transition_conditioned plan has no actions");
    if (plan.initial_state_text.empty())
        fail(Err::UnparseablePlan, "plan has no initial state text");
    if (plan.requested.empty()) fail(Err::UnparseablePlan, "plan requests no modalities");
    return plan;
}

StateResolver synthworld_resolver(const WorldSpec& world) {
    return [&world](const std::string& text) {
        return observe_all(world, resolve_state_text(world, text));
    };
}

std::vector<std::map<Modality, Vec>> complete_multimodal(const ExtractionPlan& plan,
                                                         WorldModel& model,
                                                         const WorldSpec& encoder_world,
                                                         const StateResolver& resolver,
                                                         const CompletionConfig& cfg) {
    std::vector<std::map<Modality, Vec>> steps;

    WorldState current;
    if (plan.pattern == PlanPattern::transition_conditioned) {
        current = resolver(plan.initial_state_text);
        std::map<Modality, Vec> step0;
        for (Modality m : plan.requested) {
            auto it = current.modalities.find(m);
            if (it == current.modalities.end())
                fail(Err::UnknownModality, "resolver lacks requested modality");
            step0[m] = it->second;
        }
        steps.push_back(std::move(step0));
    } else {
        // Text-conditioned framing: no state payloads, only the description.
        const Vec text_emb = embed_text(encoder_world, plan.initial_state_text);
        TokenStream stream = frame_description(text_emb, plan.requested, model.cfg.k_sig);
        auto step0 = model_predict(model, stream, cfg.space);
        for (const auto& [m, e] : step0) current.modalities[m] = e;
        steps.push_back(std::move(step0));
    }

    MemoryStore memory;
    constexpr int64_t kEpisode = 0;
    for (size_t i = 0; i < plan.actions.size(); ++i) {
        const ActionDesc action{plan.actions[i], embed_text(encoder_world, plan.actions[i])};
        const Vec cond = encode_condition(current, action);
        std::vector<ContextTokens> ctx;
        if (memory.has_episode(kEpisode))
            ctx = memory_recall_reflected(memory, kEpisode, cfg.memory_horizon, model.lift,
                                          model.reflector, cond);
        TokenStream stream = frame_input(current, action, ctx, plan.requested, model.cfg.k_sig);
        auto pred = model_predict(model, stream, cfg.space);

        MemoryEntry entry;
        entry.step_index = static_cast<int>(i);
        entry.state = current;
        entry.action = action;
        entry.prediction = pred;
        memory.append(kEpisode, std::move(entry));

        WorldState next;
        for (const auto& [m, e] : pred) next.modalities[m] = e;
        current = next;
        steps.push_back(std::move(pred));
    }
    return steps;
}

InstructionPool synthesize_pool(ProviderClient& provider, WorldModel& model,
                                const WorldSpec& world, const SynthesisRunConfig& cfg,
                                AuditLog* audit) {
    Rng rng(cfg.seed ^ 0x5e1f1724c7ull);
    Rng pick_rng = rng.fork("exemplars");

    InstructionPool pool;
    // Seed instructions come from the same provider grammar, marked seed.
    InstructionPool bootstrap;
    bootstrap.records.push_back(
        InstructionRecord{"seed-0", "Begin at the bench with the worn tray.", "seed", {}, {}, {}});
    int made = 0;
    int guard = 0;
    while (static_cast<int>(pool.size()) < cfg.seed_pool && guard++ < cfg.max_rejects) {
        auto cands =
            propose_instructions(pool.empty() ? bootstrap : pool, provider, 1, pick_rng, audit);
        InstructionRecord rec;
        rec.id = "seed-" + std::to_string(made);
        rec.text = cands[0].text;
        rec.origin = "seed";
        rec.provenance = cands[0].provenance;
        if (filter_and_add(pool, std::move(rec), cfg.rouge_threshold).accepted) ++made;
    }
    if (static_cast<int>(pool.size()) < cfg.seed_pool)
        fail(Err::EmptyPool, "could not bootstrap the seed pool (grammar saturated)");

    const StateResolver resolver = synthworld_resolver(world);
    int synth_id = 0;
    guard = 0;
    while (static_cast<int>(pool.size()) < cfg.target_pool && guard++ < cfg.max_rejects) {
        auto cands = propose_instructions(pool, provider, 1, pick_rng, audit);
        InstructionRecord rec;
        rec.id = "synth-" + std::to_string(synth_id);
        rec.text = cands[0].text;
        rec.origin = "synthesized";
        rec.provenance = cands[0].provenance;
        ExtractionPlan plan;
        try {
            plan = extract_plan(rec.text, provider, audit);
        } catch (const Error& e) {
            if (e.kind == Err::UnparseablePlan) continue;  // drop malformed candidates
            throw;
        }
        rec.plan = plan;
        rec.completions = complete_multimodal(plan, model, world, resolver, cfg.completion);
        if (filter_and_add(pool, std::move(rec), cfg.rouge_threshold).accepted) ++synth_id;
    }
    if (static_cast<int>(pool.size()) < cfg.target_pool)
        fail(Err::EmptyPool, "pool saturated before reaching the target size");
    return pool;
}

namespace {

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

void write_pool_jsonl(const std::string& path, const InstructionPool& pool) {
    std::string body;
    for (const auto& rec : pool.records) {
        body += "{\"id\":\"" + escape(rec.id) + "\"";
        body += ",\"text\":\"" + escape(rec.text) + "\"";
        body += ",\"origin\":\"" + rec.origin + "\"";
        body += ",\"provenance\":{\"provider\":\"" + rec.provenance.provider + "\"";
        body += ",\"logical_time\":" + std::to_string(rec.provenance.logical_time);
        body += ",\"request_hash\":\"" + hex64(rec.provenance.request_hash) + "\"";
        body += ",\"in_context_ids\":[";
        for (size_t i = 0; i < rec.provenance.in_context_ids.size(); ++i) {
            if (i) body += ",";
            body += "\"" + escape(rec.provenance.in_context_ids[i]) + "\"";
        }
        body += "]}";
        if (rec.plan) {
            body += ",\"plan\":{\"pattern\":\"";
            body += rec.plan->pattern == PlanPattern::description_conditioned
                        ? "description_conditioned"
                        : "transition_conditioned";
            body += "\",\"initial_state\":\"" + escape(rec.plan->initial_state_text) + "\"";
            body += ",\"actions\":[";
            for (size_t i = 0; i < rec.plan->actions.size(); ++i) {
                if (i) body += ",";
                body += "\"" + escape(rec.plan->actions[i]) + "\"";
            }
            body += "],\"modalities\":[";
            bool first = true;
            for (Modality m : rec.plan->requested) {
                if (!first) body += ",";
                first = false;
                body += std::string("\"") + modality_name(m) + "\"";
            }
            body += "]}";
        }
        if (rec.completions) {
            body += ",\"completions\":[";
            for (size_t s = 0; s < rec.completions->size(); ++s) {
                if (s) body += ",";
                body += "{";
                bool first = true;
                for (const auto& [m, e] : (*rec.completions)[s]) {
                    if (!first) body += ",";
                    first = false;
                    body += std::string("\"") + modality_name(m) + "\":" + vec_json(e);
                }
                body += "}";
            }
            body += "]";
        }
        body += "}\n";
    }
    atomic_write(path, body);
}

InstructionPool read_pool_jsonl(const std::string& path) {
    const std::string text = read_file(path);
    InstructionPool pool;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        json j = json::parse(line);
        InstructionRecord rec;
        rec.id = j.at("id").get<std::string>();
        rec.text = j.at("text").get<std::string>();
        rec.origin = j.at("origin").get<std::string>();
        rec.provenance.provider = j.at("provenance").at("provider").get<std::string>();
        rec.provenance.logical_time = j.at("provenance").at("logical_time").get<int64_t>();
        rec.provenance.request_hash =
            std::stoull(j.at("provenance").at("request_hash").get<std::string>(), nullptr, 16);
        rec.provenance.in_context_ids =
            j.at("provenance").at("in_context_ids").get<std::vector<std::string>>();
        if (j.contains("plan")) {
            ExtractionPlan plan;
            plan.pattern = j.at("plan").at("pattern").get<std::string>() == "description_conditioned"
                               ? PlanPattern::description_conditioned
                               : PlanPattern::transition_conditioned;
            plan.initial_state_text = j.at("plan").at("initial_state").get<std::string>();
            plan.actions = j.at("plan").at("actions").get<std::vector<std::string>>();
            for (const auto& m : j.at("plan").at("modalities").get<std::vector<std::string>>())
                plan.requested.insert(modality_from_name(m));
            rec.plan = plan;
        }
        if (j.contains("completions")) {
            std::vector<std::map<Modality, Vec>> comps;
            for (const auto& step : j.at("completions")) {
                std::map<Modality, Vec> one;
                for (auto it = step.begin(); it != step.end(); ++it)
                    one[modality_from_name(it.key())] = it.value().get<Vec>();
                comps.push_back(std::move(one));
            }
            rec.completions = std::move(comps);
        }
        pool.records.push_back(std::move(rec));
    }
    return pool;
}

}  // namespace wk
