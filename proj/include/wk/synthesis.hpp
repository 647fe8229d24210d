#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wk/model.hpp"
#include "wk/provider.hpp"
#include "wk/synthworld.hpp"

namespace wk {

// Instruction-synthesis pipeline: seed pool, 8-shot textual proposals via a
// provider, plan extraction, embedding-space multimodal completion via the
// world model, ROUGE-L dedup, and pool persistence.

double rouge_l(const std::string& candidate, const std::string& reference);
std::vector<std::string> rouge_tokens(const std::string& text);

enum class PlanPattern { description_conditioned, transition_conditioned };

struct ExtractionPlan {
    PlanPattern pattern = PlanPattern::description_conditioned;
    std::string initial_state_text;
    std::vector<std::string> actions;
    std::set<Modality> requested;  // per-step requested modalities
};

struct Provenance {
    std::string provider;
    int64_t logical_time = 0;
    std::vector<std::string> in_context_ids;
    uint64_t request_hash = 0;
};

struct InstructionRecord {
    std::string id;
    std::string text;
    std::string origin;  // "seed" | "synthesized"
    std::optional<ExtractionPlan> plan;
    // One entry per plan step (initial state first), per requested modality.
    std::optional<std::vector<std::map<Modality, Vec>>> completions;
    Provenance provenance;
};

struct InstructionPool {
    std::vector<InstructionRecord> records;

    bool empty() const { return records.empty(); }
    size_t size() const { return records.size(); }
};

struct FilterDecision {
    bool accepted = false;
    double max_score = 0.0;
    std::string nearest_id;
};

// Rejects iff max ROUGE-L against the pool strictly exceeds the threshold
// (textual part only); accepted candidates are appended.
FilterDecision filter_and_add(InstructionPool& pool, InstructionRecord candidate,
                              double threshold = 0.8);

struct ProposalCandidate {
    std::string text;
    Provenance provenance;
};

// Draws 8 in-context exemplars uniformly without replacement (all of them
// when the pool is smaller), then asks the provider for one new instruction
// per candidate. No seed/synthesized ratio cap is imposed.
std::vector<ProposalCandidate> propose_instructions(const InstructionPool& pool,
                                                    ProviderClient& provider, int n, Rng& rng,
                                                    AuditLog* audit = nullptr);

ExtractionPlan extract_plan(const std::string& instruction, ProviderClient& provider,
                            AuditLog* audit = nullptr);

// Resolves a textual initial state to a grounded world state; synthesis
// runs ground transition-conditioned plans through it.
using StateResolver = std::function<WorldState(const std::string&)>;

StateResolver synthworld_resolver(const WorldSpec& world);

struct CompletionConfig {
    int memory_horizon = 5;
    Space space = Space::unified;
};

// Per-step embedding completions. transition_conditioned plans start from
// the resolved initial state; each action advances the model one step, with
// predictions written to working memory and recalled (reflected) for the
// following steps. description_conditioned plans start from the model's
// text-conditioned prediction instead.
std::vector<std::map<Modality, Vec>> complete_multimodal(const ExtractionPlan& plan,
                                                         WorldModel& model,
                                                         const WorldSpec& encoder_world,
                                                         const StateResolver& resolver,
                                                         const CompletionConfig& cfg = {});

struct SynthesisRunConfig {
    int seed_pool = 50;
    int target_pool = 200;
    double rouge_threshold = 0.8;
    uint64_t seed = 1;
    int max_rejects = 4000;  // stop fighting a saturated pool
    CompletionConfig completion;
};

// Seed-pool bootstrap + grow-to-target loop. Returns the grown pool; every
// synthesized record carries its plan and completions.
InstructionPool synthesize_pool(ProviderClient& provider, WorldModel& model,
                                const WorldSpec& world, const SynthesisRunConfig& cfg,
                                AuditLog* audit = nullptr);

void write_pool_jsonl(const std::string& path, const InstructionPool& pool);
InstructionPool read_pool_jsonl(const std::string& path);

}  // namespace wk
