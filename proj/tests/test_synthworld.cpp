#include <doctest.h>

#include <filesystem>
#include <set>

#include "wk/dataset_io.hpp"
#include "wk/synthworld.hpp"

using namespace wk;

namespace {

WorldGenConfig small_cfg() {
    WorldGenConfig cfg;
    cfg.latent_dim = 6;
    cfg.d_enc = 12;
    cfg.n_actions = 8;
    cfg.n_scenarios = 2;
    cfg.bow_dim = 48;
    return cfg;
}

std::string tmpdir() {
    auto p = std::filesystem::temp_directory_path() / "worldkit_test_synth";
    std::filesystem::create_directories(p);
    return p.string();
}

}  // namespace

TEST_CASE("gen_world determinism and partition") {
    const auto cfg = small_cfg();
    WorldSpec a = gen_world(5, cfg);
    WorldSpec b = gen_world(5, cfg);
    CHECK(a.actions.size() == 8);
    for (size_t i = 0; i < a.actions.size(); ++i) {
        CHECK(a.actions[i].A.a == b.actions[i].A.a);  // bit-identical
        CHECK(a.actions[i].b == b.actions[i].b);
        CHECK(a.actions[i].text == b.actions[i].text);
    }
    int per_scen0 = 0, per_scen1 = 0;
    for (const auto& act : a.actions) (act.scenario == "scenario0" ? per_scen0 : per_scen1)++;
    CHECK(per_scen0 == 4);
    CHECK(per_scen1 == 4);

    WorldSpec c = gen_world(6, cfg);
    bool any_diff = false;
    for (size_t i = 0; i < a.actions.size() && !any_diff; ++i)
        any_diff = a.actions[i].A.a != c.actions[i].A.a;
    CHECK(any_diff);

    WorldGenConfig bad = cfg;
    bad.latent_dim = 0;
    CHECK_THROWS_AS(gen_world(1, bad), Error);
}

TEST_CASE("esoteric fraction marks actions per scenario") {
    auto cfg = small_cfg();
    cfg.esoteric_fraction = 0.25;
    WorldSpec w = gen_world(5, cfg);
    for (const auto& scen : w.scenarios) {
        int eso = 0, total = 0;
        for (const auto& a : w.actions)
            if (a.scenario == scen) {
                ++total;
                eso += a.esoteric ? 1 : 0;
            }
        CHECK(total == 4);
        CHECK(eso == 1);
    }
}

TEST_CASE("step_latent identity action and composition oracle") {
    auto cfg = small_cfg();
    WorldSpec w = gen_world(5, cfg);
    ActionSpec ident;
    ident.name = "ident";
    ident.A = Mat(cfg.latent_dim, cfg.latent_dim);
    for (int i = 0; i < cfg.latent_dim; ++i) ident.A.at(i, i) = 1.0;
    ident.b.assign(cfg.latent_dim, 0.0);
    ident.text = "do nothing";
    ident.scenario = "scenario0";
    w.actions.push_back(ident);

    Rng rng(3);
    Vec z(cfg.latent_dim);
    for (auto& x : z) x = rng.normal();
    CHECK(step_latent(w, z, "ident") == z);

    // Two successive steps equal one composed affine map.
    const auto& a0 = w.actions[0];
    const auto& a1 = w.actions[1];
    const Vec z2 = step_latent(w, step_latent(w, z, a0.name), a1.name);
    Mat A = matmul(a1.A, a0.A);
    Vec b(cfg.latent_dim, 0.0);
    for (int i = 0; i < cfg.latent_dim; ++i) {
        double s = a1.b[i];
        for (int j = 0; j < cfg.latent_dim; ++j) s += a1.A.at(i, j) * a0.b[j];
        b[i] = s;
    }
    for (int i = 0; i < cfg.latent_dim; ++i) {
        double s = b[i];
        for (int j = 0; j < cfg.latent_dim; ++j) s += A.at(i, j) * z[j];
        CHECK(z2[i] == doctest::Approx(s).epsilon(1e-10));
    }

    CHECK_THROWS_AS(step_latent(w, z, "no-such-action"), Error);
}

TEST_CASE("spectral radius of dynamics stays bounded") {
    WorldSpec w = gen_world(12, small_cfg());
    for (const auto& a : w.actions) CHECK(spectral_norm(a.A) <= 1.05);
}

TEST_CASE("observe determinism, zero case, and injectivity") {
    auto cfg = small_cfg();
    WorldSpec w = gen_world(5, cfg);
    Rng rng(4);
    Vec z(cfg.latent_dim);
    for (auto& x : z) x = rng.normal();
    CHECK(observe(w, z, Modality::image) == observe(w, z, Modality::image));

    WorldSpec wz = w;
    wz.observations[Modality::image].c.assign(cfg.d_enc, 0.0);
    const Vec zero(cfg.latent_dim, 0.0);
    for (double v : observe(wz, zero, Modality::image)) CHECK(v == 0.0);

    for (int it = 0; it < 10000; ++it) {
        Vec z1(cfg.latent_dim), z2(cfg.latent_dim);
        for (auto& x : z1) x = rng.normal();
        for (auto& x : z2) x = rng.normal();
        if (z1 == z2) continue;
        CHECK(observe(w, z1, Modality::video) != observe(w, z2, Modality::video));
    }
    CHECK_THROWS_AS(observe(w, z, Modality::text), Error);
}

TEST_CASE("cross-modal recoverability on noiseless data") {
    WorldGenConfig cfg = small_cfg();
    cfg.d_enc = 24;
    WorldSpec w = gen_world(21, cfg);
    Rng rng(5);
    for (int it = 0; it < 50; ++it) {
        Vec z(cfg.latent_dim);
        for (auto& x : z) x = rng.normal();
        const Vec img = observe(w, z, Modality::image);
        const Vec z_rec = invert_observation(w, img, Modality::image);
        const Vec aud_rec = observe(w, z_rec, Modality::audio);
        const Vec aud_true = observe(w, z, Modality::audio);
        CHECK(cosine_similarity(aud_rec, aud_true) >= 0.999);
    }
}

TEST_CASE("gen_episodes chaining invariant and oracle consistency") {
    WorldSpec w = gen_world(5, small_cfg());
    DatasetGenConfig dc;
    dc.n_episodes = 6;
    dc.episode_len = 7;
    dc.seed = 9;
    GeneratedData data = gen_episodes(w, dc);
    CHECK(data.episodes.size() == 6);
    for (const auto& ep : data.episodes) {
        CHECK(ep.samples.size() == 6);
        for (size_t t = 0; t < ep.samples.size(); ++t) {
            const auto& s = ep.samples[t];
            CHECK(s.step_index == static_cast<int>(t));
            const auto& sc = data.sidecar.at({ep.episode_id, static_cast<int>(t)});
            for (const auto& [m, e] : s.after.modalities)
                CHECK(e == observe(w, sc.z_after, m));  // bit-exact oracle consistency
            for (const auto& [m, e] : s.before.modalities)
                CHECK(e == observe(w, sc.z_before, m));
            if (t + 1 < ep.samples.size()) {
                const auto& nxt = data.sidecar.at({ep.episode_id, static_cast<int>(t + 1)});
                CHECK(sc.z_after == nxt.z_before);  // latent chaining
            }
        }
    }
}

TEST_CASE("drop_one menu hides exactly one modality per step") {
    WorldSpec w = gen_world(5, small_cfg());
    DatasetGenConfig dc;
    dc.n_episodes = 4;
    dc.episode_len = 5;
    dc.menu.mode = "drop_one";
    dc.seed = 10;
    GeneratedData data = gen_episodes(w, dc);
    for (const auto& ep : data.episodes)
        for (const auto& s : ep.samples) {
            CHECK(s.before.modalities.size() == 2);
            CHECK(s.after.modalities.size() == 3);
        }
}

TEST_CASE("esoteric modes control action usage") {
    WorldSpec w = gen_world(5, small_cfg());
    std::set<std::string> esoteric_texts;
    for (const auto& a : w.actions)
        if (a.esoteric) esoteric_texts.insert(a.text);

    DatasetGenConfig dc;
    dc.n_episodes = 20;
    dc.episode_len = 5;
    dc.seed = 12;
    dc.esoteric_mode = EsotericMode::exclude;
    for (const auto& ep : gen_episodes(w, dc).episodes)
        for (const auto& s : ep.samples) CHECK(!esoteric_texts.count(s.action.text));

    dc.esoteric_mode = EsotericMode::only;
    for (const auto& ep : gen_episodes(w, dc).episodes)
        for (const auto& s : ep.samples) CHECK(esoteric_texts.count(s.action.text));

    dc.esoteric_mode = EsotericMode::include;
    dc.esoteric_prob = 0.5;
    int eso = 0, total = 0;
    for (const auto& ep : gen_episodes(w, dc).episodes)
        for (const auto& s : ep.samples) {
            ++total;
            eso += esoteric_texts.count(s.action.text) ? 1 : 0;
        }
    CHECK(eso > total / 4);
    CHECK(eso < 3 * total / 4);
}

TEST_CASE("gen_dataset writes byte-identical files on rerun") {
    WorldSpec w = gen_world(5, small_cfg());
    DatasetGenConfig dc;
    dc.n_episodes = 5;
    dc.episode_len = 4;
    dc.seed = 11;
    const std::string dir = tmpdir();
    Manifest m1 = gen_dataset(w, dc, dir + "/d1.jsonl", dir + "/m1.json", dir + "/s1.jsonl");
    Manifest m2 = gen_dataset(w, dc, dir + "/d2.jsonl", dir + "/m2.json", dir + "/s2.jsonl");
    CHECK(m1.dataset_hash == m2.dataset_hash);
    CHECK(read_file(dir + "/d1.jsonl") == read_file(dir + "/d2.jsonl"));
    CHECK(m1.n_samples == 5 * 3);
    int total = 0;
    for (const auto& [scen, n] : m1.per_scenario) total += n;
    CHECK(total == m1.n_samples);

    auto eps = read_dataset_jsonl(dir + "/d1.jsonl", w);
    GeneratedData orig = gen_episodes(w, dc);
    REQUIRE(eps.size() == orig.episodes.size());
    for (size_t e = 0; e < eps.size(); ++e) {
        REQUIRE(eps[e].samples.size() == orig.episodes[e].samples.size());
        for (size_t t = 0; t < eps[e].samples.size(); ++t) {
            const auto& a = eps[e].samples[t];
            const auto& b = orig.episodes[e].samples[t];
            CHECK(a.action.text == b.action.text);
            CHECK(a.action.embedding == b.action.embedding);
            for (const auto& [m, emb] : b.before.modalities)
                CHECK(a.before.modalities.at(m) == emb);
        }
    }

    Manifest mr = read_manifest_json(dir + "/m1.json");
    CHECK(mr.dataset_hash == m1.dataset_hash);
    CHECK(mr.per_scenario == m1.per_scenario);

    auto sc = read_sidecar_jsonl(dir + "/s1.jsonl");
    CHECK(sc.size() == orig.sidecar.size());
    CHECK(sc.at({0, 0}).z_before == orig.sidecar.at({0, 0}).z_before);
}

TEST_CASE("world spec json round trip preserves behaviour") {
    WorldSpec w = gen_world(77, small_cfg());
    const std::string dir = tmpdir();
    write_world_json(dir + "/world.json", w);
    WorldSpec r = read_world_json(dir + "/world.json");
    Rng rng(6);
    Vec z(w.latent_dim);
    for (auto& x : z) x = rng.normal();
    CHECK(step_latent(w, z, "act0") == step_latent(r, z, "act0"));
    CHECK(observe(w, z, Modality::audio) == observe(r, z, Modality::audio));
    CHECK(embed_text(w, "stir the pan") == embed_text(r, "stir the pan"));
}

TEST_CASE("embed_text tokenization and out-of-vocab hashing") {
    WorldSpec w = gen_world(5, small_cfg());
    CHECK(embed_text(w, "Stir, the PAN!") == embed_text(w, "stir the pan"));
    CHECK_NOTHROW(embed_text(w, "zzz qqq www"));
    CHECK_THROWS_AS(embed_text(w, "..."), Error);
}

TEST_CASE("resolve_state_text deterministic and text-sensitive") {
    WorldSpec w = gen_world(5, small_cfg());
    CHECK(resolve_state_text(w, "begin at the dusty bench") ==
          resolve_state_text(w, "begin at the dusty bench"));
    CHECK(resolve_state_text(w, "begin at the dusty bench") !=
          resolve_state_text(w, "begin at the copper kettle"));
}
