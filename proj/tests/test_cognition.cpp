#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "wk/cognition.hpp"
#include "wk/dataset_io.hpp"
#include "wk/synthworld.hpp"

using namespace wk;

namespace {

WorldSpec test_world() { return gen_world(3, WorldGenConfig{4, 8, 6, 2, 3, 32, 0.3, Squash::tanh_}); }

std::vector<TransitionSample> make_samples(const WorldSpec& w, int n, uint64_t seed) {
    DatasetGenConfig dc;
    dc.n_episodes = (n + 2) / 3;
    dc.episode_len = 4;
    dc.seed = seed;
    auto flat = gen_episodes(w, dc).flat();
    flat.resize(static_cast<size_t>(n));
    return flat;
}

// Independent brute-force oracle: recompute keys from scratch, full sort.
std::vector<size_t> brute_force_topk(const std::vector<TransitionSample>& samples,
                                     const TransitionSample& query, int k) {
    std::vector<std::pair<double, size_t>> scored;
    for (size_t i = 0; i < samples.size(); ++i)
        scored.emplace_back(cosine_similarity(unified_encode(samples[i]), unified_encode(query)), i);
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<size_t> out;
    for (int i = 0; i < k && i < static_cast<int>(scored.size()); ++i)
        out.push_back(scored[static_cast<size_t>(i)].second);
    return out;
}

}  // namespace

TEST_CASE("kb_build entry count, key reproducibility, empty case") {
    WorldSpec w = test_world();
    auto samples = make_samples(w, 50, 1);
    KnowledgeBase kb = kb_build(samples, "scenario0");
    CHECK(kb.size() == 50);
    for (size_t i = 0; i < kb.entries.size(); ++i)
        CHECK(kb.entries[i].key == unified_encode(samples[i]));

    KnowledgeBase empty = kb_build({}, "none");
    CHECK(empty.size() == 0);
    CHECK_THROWS_AS(kb_retrieve(empty, samples[0].before, samples[0].action, 1), Error);

    KnowledgeBase rebuilt = kb_build(samples, "scenario0");
    for (size_t i = 0; i < kb.entries.size(); ++i)
        CHECK(kb.entries[i].key == rebuilt.entries[i].key);
}

TEST_CASE("self-retrieval ranks the stored sample first with similarity 1") {
    WorldSpec w = test_world();
    auto samples = make_samples(w, 30, 2);
    KnowledgeBase kb = kb_build(samples);
    const auto hits = kb_retrieve(kb, samples[7].before, samples[7].action, 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].index == 7);
    CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("k larger than KB clamps") {
    WorldSpec w = test_world();
    auto samples = make_samples(w, 50, 3);
    KnowledgeBase kb = kb_build(samples);
    CHECK(kb_retrieve(kb, samples[0].before, samples[0].action, 100).size() == 50);
}

TEST_CASE("retrieval equals brute force over random queries") {
    WorldSpec w = test_world();
    auto samples = make_samples(w, 200, 4);
    KnowledgeBase kb = kb_build(samples);
    auto queries = make_samples(w, 50, 5);
    for (const auto& q : queries) {
        for (int k : {1, 5, 17}) {
            const auto hits = kb_retrieve(kb, q.before, q.action, k);
            const auto expect = brute_force_topk(samples, q, k);
            REQUIRE(hits.size() == expect.size());
            for (size_t i = 0; i < hits.size(); ++i) CHECK(hits[i].index == expect[i]);
            for (size_t i = 1; i < hits.size(); ++i)
                CHECK(hits[i - 1].similarity >= hits[i].similarity);
        }
    }
}

TEST_CASE("kb export/import round trip") {
    WorldSpec w = test_world();
    auto samples = make_samples(w, 12, 6);
    KnowledgeBase kb = kb_build(samples);
    const std::string path =
        (std::filesystem::temp_directory_path() / "worldkit_kb_test.jsonl").string();
    write_kb_jsonl(path, kb);
    KnowledgeBase r = read_kb_jsonl(path, w);
    REQUIRE(r.size() == kb.size());
    for (size_t i = 0; i < kb.entries.size(); ++i) {
        CHECK(r.entries[i].key == kb.entries[i].key);
        CHECK(r.entries[i].sample.action.text == kb.entries[i].sample.action.text);
        CHECK(r.entries[i].sample.before.modalities == kb.entries[i].sample.before.modalities);
    }
}

TEST_CASE("memory append ordering and isolation") {
    MemoryStore store;
    WorldSpec w = test_world();
    auto samples = make_samples(w, 6, 7);

    auto entry_of = [&](int step, size_t idx) {
        MemoryEntry e;
        e.step_index = step;
        e.state = samples[idx].before;
        e.action = samples[idx].action;
        return e;
    };

    store.append(1, entry_of(0, 0));
    store.append(1, entry_of(1, 1));
    store.append(2, entry_of(0, 2));  // interleaved episode
    store.append(1, entry_of(2, 3));
    CHECK(store.episode(1).size() == 3);
    CHECK(store.episode(2).size() == 1);
    for (size_t i = 0; i < 3; ++i) CHECK(store.episode(1)[i].step_index == static_cast<int>(i));

    CHECK_THROWS_AS(store.append(1, entry_of(1, 4)), Error);  // non-monotonic
    CHECK_THROWS_AS(store.episode(99), Error);                // unknown episode

    // Isolation: appends to episode 2 do not disturb episode 1 recall.
    ContextLift lift = ContextLift::init(8, 16, 1);
    const auto before = memory_recall_raw(store, 1, 10, lift);
    store.append(2, entry_of(5, 5));
    const auto after = memory_recall_raw(store, 1, 10, lift);
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) CHECK(before[i].a == after[i].a);
}

TEST_CASE("memory recall horizons") {
    MemoryStore store;
    WorldSpec w = test_world();
    auto samples = make_samples(w, 5, 8);
    for (int i = 0; i < 3; ++i) {
        MemoryEntry e;
        e.step_index = i;
        e.state = samples[static_cast<size_t>(i)].before;
        e.action = samples[static_cast<size_t>(i)].action;
        e.ground_truth = samples[static_cast<size_t>(i)].after;
        store.append(4, e);
    }
    ContextLift lift = ContextLift::init(8, 16, 2);
    CHECK(memory_recall_raw(store, 4, 0, lift).empty());
    CHECK(memory_recall_raw(store, 4, 5, lift).size() == 3);  // clamp
    const auto two = memory_recall_raw(store, 4, 2, lift);
    REQUIRE(two.size() == 2);
    // Oldest -> newest: last recall row equals the most recent entry.
    CHECK(two[1].a == encode_context(lift, store.episode(4)[2]).a);
    CHECK(two[0].a == encode_context(lift, store.episode(4)[1]).a);
}
