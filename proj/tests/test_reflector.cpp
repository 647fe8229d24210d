#include <doctest.h>

#include <algorithm>

#include "wk/cognition.hpp"
#include "wk/model.hpp"
#include "wk/reflector.hpp"
#include "wk/synthworld.hpp"

using namespace wk;

namespace {

struct Fixture {
    WorldSpec world;
    WorldModel model;
    TransitionSample sample;

    Fixture()
        : world(gen_world(3, WorldGenConfig{4, 8, 4, 1, 3, 32, 0.25, Squash::tanh_})),
          model(WorldModel::init(
              [] {
                  ModelConfig c;
                  c.d_model = 16;
                  c.d_enc = 8;
                  c.n_layers = 1;
                  c.n_heads = 2;
                  c.k_sig = 2;
                  c.d_ff = 32;
                  c.seed = 9;
                  return c;
              }(),
              ReflectorConfig{4, 2, 2, 0, 32})) {
        DatasetGenConfig dc;
        dc.n_episodes = 1;
        dc.episode_len = 3;
        dc.seed = 5;
        sample = gen_episodes(world, dc).episodes[0].samples[0];
    }
};

}  // namespace

TEST_CASE("encode_condition shares the retrieval-key definition") {
    Fixture f;
    const Vec cond = encode_condition(f.sample.before, f.sample.action);
    CHECK(cond.size() == 16);  // 2 * d_enc
    CHECK(normalize(cond) == unified_encode(f.sample));

    // Single modality: concat of normalized embedding and action.
    WorldState solo;
    solo.modalities[Modality::audio] = f.sample.before.modalities.begin()->second;
    const Vec c2 = encode_condition(solo, f.sample.action);
    const Vec ne = normalize(solo.modalities[Modality::audio]);
    for (size_t i = 0; i < ne.size(); ++i) CHECK(c2[i] == doctest::Approx(ne[i]).epsilon(1e-12));

    // Permuting modality insertion order changes nothing (recomputation).
    CHECK(encode_condition(f.sample.before, f.sample.action) == cond);
}

TEST_CASE("encode_context row count and determinism") {
    Fixture f;
    const Mat rows = encode_context(f.model.lift, f.sample);
    CHECK(rows.rows == 3 + 1 + 3);  // full menus: 3 before + action + 3 after
    CHECK(rows.cols == 16);
    CHECK(rows.a == encode_context(f.model.lift, f.sample).a);

    // Memory entry without after-state: rows only for available parts.
    MemoryEntry entry;
    entry.state = f.sample.before;
    entry.action = f.sample.action;
    const Mat partial = encode_context(f.model.lift, entry);
    CHECK(partial.rows == 3 + 1);

    entry.prediction = std::map<Modality, Vec>{{Modality::image, Vec(8, 0.1)}};
    CHECK(encode_context(f.model.lift, entry).rows == 3 + 1 + 1);
}

TEST_CASE("reflect emits exactly n_queries tokens for any context length") {
    Fixture f;
    const Vec cond = encode_condition(f.sample.before, f.sample.action);
    for (int n_ctx : {1, 3, 7, 20}) {
        Mat ctx(n_ctx, 16);
        Rng rng(n_ctx);
        for (auto& x : ctx.a) x = rng.normal();
        ContextTokens out = reflect(f.model.reflector, ctx, cond);
        CHECK(out.tokens.rows == 4);
        CHECK(out.tokens.cols == 16);
    }
}

TEST_CASE("reflect is invariant to context row permutation") {
    Fixture f;
    const Vec cond = encode_condition(f.sample.before, f.sample.action);
    Rng rng(11);
    Mat ctx = Mat::randn(5, 16, 0.8, rng);
    const Mat out = reflect(f.model.reflector, ctx, cond).tokens;

    // Reverse the rows.
    Mat rev(5, 16);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 16; ++j) rev.at(i, j) = ctx.at(4 - i, j);
    const Mat out2 = reflect(f.model.reflector, rev, cond).tokens;
    for (size_t i = 0; i < out.a.size(); ++i)
        CHECK(out.a[i] == doctest::Approx(out2.a[i]).epsilon(1e-12));
}

TEST_CASE("different conditions give different tokens (sampled)") {
    Rng rng(13);
    int differs = 0;
    for (int it = 0; it < 100; ++it) {
        ReflectorConfig rc{4, 1, 2, 0, 16};
        Reflector refl = Reflector::init(rc, 8, 6, 1000 + static_cast<uint64_t>(it));
        Mat ctx = Mat::randn(3, 8, 1.0, rng);
        Vec c1(6), c2(6);
        for (auto& x : c1) x = rng.normal();
        for (auto& x : c2) x = rng.normal();
        const Mat t1 = reflect(refl, ctx, c1).tokens;
        const Mat t2 = reflect(refl, ctx, c2).tokens;
        if (t1.a != t2.a) ++differs;
    }
    CHECK(differs == 100);
}

TEST_CASE("reflected tokens reach the backbone through the context override") {
    Fixture f;
    const Vec cond = encode_condition(f.sample.before, f.sample.action);
    const Mat ctx = encode_context(f.model.lift, f.sample);
    ContextTokens tokens = reflect(f.model.reflector, ctx, cond);

    std::set<Modality> req{Modality::image};
    TokenStream with_ctx =
        frame_input(f.sample.before, f.sample.action, {tokens}, req, f.model.cfg.k_sig);
    TokenStream without =
        frame_input(f.sample.before, f.sample.action, {}, req, f.model.cfg.k_sig);
    const Vec p1 = model_predict(f.model, with_ctx).at(Modality::image);
    const Vec p2 = model_predict(f.model, without).at(Modality::image);
    CHECK(p1 != p2);
}
