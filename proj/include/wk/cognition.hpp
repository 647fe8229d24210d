#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wk/core.hpp"
#include "wk/reflector.hpp"

namespace wk {

// ------------------------------------------------------- knowledge base

struct KbEntry {
    Vec key;  // unified_encode(sample), normalized
    TransitionSample sample;
};

struct KnowledgeBase {
    std::string scenario;
    std::vector<KbEntry> entries;

    size_t size() const { return entries.size(); }
};

KnowledgeBase kb_build(const std::vector<TransitionSample>& samples,
                       const std::string& scenario = "");

struct RetrievalHit {
    const TransitionSample* sample;
    double similarity;
    size_t index;
};

// Exact top-k scan by cosine over keys, descending, ties by insertion
// order; k is clamped to the KB size. Throws EmptyKnowledgeBase on an empty
// KB (distinct from an empty result).
std::vector<RetrievalHit> kb_retrieve(const KnowledgeBase& kb, const WorldState& query_state,
                                      const ActionDesc& query_action, int k);

// Slot for approximate backends behind the same contract; the default (and
// only) implementation is the exact scan.
struct RetrievalBackend {
    virtual ~RetrievalBackend() = default;
    virtual std::vector<RetrievalHit> retrieve(const KnowledgeBase& kb, const Vec& query_key,
                                               int k) const = 0;
};

struct ExactScanBackend final : RetrievalBackend {
    std::vector<RetrievalHit> retrieve(const KnowledgeBase& kb, const Vec& query_key,
                                       int k) const override;
};

void write_kb_jsonl(const std::string& path, const KnowledgeBase& kb);
KnowledgeBase read_kb_jsonl(const std::string& path, const struct WorldSpec& encoder_spec);

// -------------------------------------------------------- working memory

struct MemoryEntry {
    int step_index = 0;
    WorldState state;
    ActionDesc action;
    std::optional<std::map<Modality, Vec>> prediction;
    std::optional<WorldState> ground_truth;
};

// Per-episode append-only history of (state, action, prediction) triples.
struct MemoryStore {
    std::map<int64_t, std::vector<MemoryEntry>> episodes;

    void append(int64_t episode_id, MemoryEntry entry);
    const std::vector<MemoryEntry>& episode(int64_t episode_id) const;
    bool has_episode(int64_t episode_id) const { return episodes.count(episode_id) > 0; }
};

// Context rows for a memory entry: before-state components, action, and the
// after-state as ground truth when present, else the stored prediction.
Mat encode_context(const ContextLift& lift, const MemoryEntry& entry);

// Last min(h, len) entries, oldest -> newest, as raw context matrices.
std::vector<Mat> memory_recall_raw(const MemoryStore& store, int64_t episode_id, int horizon,
                                   const ContextLift& lift);

// Same horizon, each entry reflected into context tokens conditioned on the
// current query.
std::vector<ContextTokens> memory_recall_reflected(const MemoryStore& store, int64_t episode_id,
                                                   int horizon, const ContextLift& lift,
                                                   Reflector& reflector, const Vec& condition);

std::string memory_dump_json(const MemoryStore& store);

}  // namespace wk
