#include "wk/cognition.hpp"

#include <algorithm>

#include <json.hpp>

#include "wk/dataset_io.hpp"
#include "wk/synthworld.hpp"

namespace wk {

KnowledgeBase kb_build(const std::vector<TransitionSample>& samples, const std::string& scenario) {
    KnowledgeBase kb;
    kb.scenario = scenario;
    kb.entries.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        try {
            kb.entries.push_back(KbEntry{unified_encode(samples[i]), samples[i]});
        } catch (const Error& e) {
            if (e.kind == Err::ZeroVector)
                fail(Err::ZeroVector, "kb_build: degenerate sample at index " + std::to_string(i));
            throw;
        }
    }
    return kb;
}

std::vector<RetrievalHit> ExactScanBackend::retrieve(const KnowledgeBase& kb, const Vec& query_key,
                                                     int k) const {
    if (kb.entries.empty()) fail(Err::EmptyKnowledgeBase, "retrieve on empty knowledge base");
    if (k < 1) fail(Err::InvalidConfig, "retrieve: k must be >= 1");
    std::vector<RetrievalHit> hits;
    hits.reserve(kb.entries.size());
    for (size_t i = 0; i < kb.entries.size(); ++i) {
        const double sim = cosine_similarity(kb.entries[i].key, query_key);
        hits.push_back(RetrievalHit{&kb.entries[i].sample, sim, i});
    }
    std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.index < b.index;
    });
    if (static_cast<int>(hits.size()) > k) hits.resize(static_cast<size_t>(k));
    return hits;
}

std::vector<RetrievalHit> kb_retrieve(const KnowledgeBase& kb, const WorldState& query_state,
                                      const ActionDesc& query_action, int k) {
    TransitionSample probe;
    probe.before = query_state;
    probe.action = query_action;
    const Vec key = unified_encode(probe);
    return ExactScanBackend{}.retrieve(kb, key, k);
}

void write_kb_jsonl(const std::string& path, const KnowledgeBase& kb) {
    std::string body;
    for (const auto& e : kb.entries) {
        body += "{\"key\":" + vec_json(e.key);
        body += ",\"episode_id\":" + std::to_string(e.sample.episode_id);
        body += ",\"step_index\":" + std::to_string(e.sample.step_index);
        body += ",\"scenario\":\"" + e.sample.scenario + "\"";
        body += ",\"action_text\":\"" + e.sample.action.text + "\"";
        std::string mods = "{";
        bool first = true;
        for (const auto& [m, emb] : e.sample.before.modalities) {
            if (!first) mods += ",";
            first = false;
            mods += std::string("\"") + modality_name(m) + "\":" + vec_json(emb);
        }
        body += ",\"modalities\":" + mods + "}";
        mods = "{";
        first = true;
        for (const auto& [m, emb] : e.sample.after.modalities) {
            if (!first) mods += ",";
            first = false;
            mods += std::string("\"") + modality_name(m) + "\":" + vec_json(emb);
        }
        body += ",\"next_modalities\":" + mods + "}";
        body += "}\n";
    }
    atomic_write(path, body);
}

KnowledgeBase read_kb_jsonl(const std::string& path, const WorldSpec& encoder_spec) {
    const std::string text = read_file(path);
    KnowledgeBase kb;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        KbEntry e;
        e.key = j.at("key").get<Vec>();
        e.sample.episode_id = j.at("episode_id").get<int64_t>();
        e.sample.step_index = j.at("step_index").get<int>();
        e.sample.scenario = j.at("scenario").get<std::string>();
        const std::string action_text = j.at("action_text").get<std::string>();
        e.sample.action = ActionDesc{action_text, embed_text(encoder_spec, action_text)};
        for (auto it = j.at("modalities").begin(); it != j.at("modalities").end(); ++it)
            e.sample.before.modalities[modality_from_name(it.key())] = it.value().get<Vec>();
        for (auto it = j.at("next_modalities").begin(); it != j.at("next_modalities").end(); ++it)
            e.sample.after.modalities[modality_from_name(it.key())] = it.value().get<Vec>();
        kb.entries.push_back(std::move(e));
    }
    return kb;
}

void MemoryStore::append(int64_t episode_id, MemoryEntry entry) {
    auto& list = episodes[episode_id];
    if (!list.empty() && entry.step_index <= list.back().step_index)
        fail(Err::NonMonotonicStep,
             "memory_append: step " + std::to_string(entry.step_index) + " after " +
                 std::to_string(list.back().step_index));
    list.push_back(std::move(entry));
}

const std::vector<MemoryEntry>& MemoryStore::episode(int64_t episode_id) const {
    auto it = episodes.find(episode_id);
    if (it == episodes.end())
        fail(Err::UnknownEpisode, "unknown episode " + std::to_string(episode_id));
    return it->second;
}

Mat encode_context(const ContextLift& lift, const MemoryEntry& entry) {
    TransitionSample s;
    s.before = entry.state;
    s.action = entry.action;
    if (entry.ground_truth) {
        s.after = *entry.ground_truth;
    } else if (entry.prediction) {
        for (const auto& [m, e] : *entry.prediction) s.after.modalities[m] = e;
    }
    return encode_context(lift, s);
}

std::vector<Mat> memory_recall_raw(const MemoryStore& store, int64_t episode_id, int horizon,
                                   const ContextLift& lift) {
    const auto& list = store.episode(episode_id);
    if (horizon < 0) fail(Err::InvalidConfig, "memory_recall: negative horizon");
    const size_t n = std::min(static_cast<size_t>(horizon), list.size());
    std::vector<Mat> out;
    out.reserve(n);
    for (size_t i = list.size() - n; i < list.size(); ++i)
        out.push_back(encode_context(lift, list[i]));
    return out;
}

std::vector<ContextTokens> memory_recall_reflected(const MemoryStore& store, int64_t episode_id,
                                                   int horizon, const ContextLift& lift,
                                                   Reflector& reflector, const Vec& condition) {
    const auto& list = store.episode(episode_id);
    if (horizon < 0) fail(Err::InvalidConfig, "memory_recall: negative horizon");
    const size_t n = std::min(static_cast<size_t>(horizon), list.size());
    std::vector<ContextTokens> out;
    out.reserve(n);
    for (size_t i = list.size() - n; i < list.size(); ++i)
        out.push_back(reflect(reflector, encode_context(lift, list[i]), condition));
    return out;
}

std::string memory_dump_json(const MemoryStore& store) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [ep, list] : store.episodes) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& e : list) {
            nlohmann::json o;
            o["step_index"] = e.step_index;
            o["action_text"] = e.action.text;
            nlohmann::json mods = nlohmann::json::array();
            for (const auto& [m, emb] : e.state.modalities) mods.push_back(modality_name(m));
            o["state_modalities"] = mods;
            o["has_prediction"] = e.prediction.has_value();
            o["has_ground_truth"] = e.ground_truth.has_value();
            arr.push_back(o);
        }
        j[std::to_string(ep)] = arr;
    }
    return j.dump(2);
}

}  // namespace wk
