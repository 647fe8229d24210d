#include <doctest.h>

#include <filesystem>

#include "wk/backbone.hpp"
#include "wk/dataset_io.hpp"
#include "wk/model.hpp"

using namespace wk;

namespace {

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.k_sig = 3;
    cfg.d_enc = 8;
    cfg.d_ff = 32;
    cfg.max_seq_len = 64;
    cfg.adapter_rank = 2;
    cfg.seed = 42;
    return cfg;
}

TokenStream tiny_stream(Rng& rng, std::set<Modality> req = {Modality::image}) {
    WorldState s;
    Vec e(8);
    for (auto& x : e) x = rng.normal();
    s.modalities[Modality::video] = e;
    for (auto& x : e) x = rng.normal();
    s.modalities[Modality::audio] = e;
    Vec a(8);
    for (auto& x : a) x = rng.normal();
    return frame_input(s, ActionDesc{"poke", a}, {}, req, 3);
}

}  // namespace

TEST_CASE("forward output row count equals token count, deterministic") {
    Backbone bb = Backbone::init(tiny_cfg());
    Rng rng(1);
    TokenStream ts = tiny_stream(rng);
    Mat h1 = forward_values(bb, ts);
    Mat h2 = forward_values(bb, ts);
    CHECK(h1.rows == static_cast<int>(ts.tokens.size()));
    CHECK(h1.cols == 16);
    CHECK(h1.a == h2.a);  // bit-identical
}

TEST_CASE("causal mask: changing a token leaves all earlier rows unchanged") {
    ModelConfig cfg = tiny_cfg();
    cfg.k_sig = 1;
    Backbone bb = Backbone::init(cfg);
    WorldState s;
    s.modalities[Modality::image] = Vec(8, 0.3);
    ActionDesc act{"x", Vec(8, -0.2)};

    // Two valid streams differing only in their final token.
    TokenStream a = frame_input(s, act, {}, {Modality::image, Modality::video}, 1);
    TokenStream b = frame_input(s, act, {}, {Modality::image, Modality::audio}, 1);
    REQUIRE(a.tokens.size() == b.tokens.size());
    Mat ha = forward_values(bb, a);
    Mat hb = forward_values(bb, b);
    for (int i = 0; i + 1 < ha.rows; ++i)
        for (int j = 0; j < ha.cols; ++j) CHECK(ha.at(i, j) == hb.at(i, j));
    bool last_differs = false;
    for (int j = 0; j < ha.cols; ++j)
        if (ha.at(ha.rows - 1, j) != hb.at(hb.rows - 1, j)) last_differs = true;
    CHECK(last_differs);

    // Mutating an early payload changes rows at and after it only.
    TokenStream c = a;
    c.tokens[1].payload[0] += 1.0;
    Mat hc = forward_values(bb, c);
    for (int j = 0; j < ha.cols; ++j) CHECK(ha.at(0, j) == hc.at(0, j));
    bool differs = false;
    for (int i = 1; i < ha.rows && !differs; ++i)
        for (int j = 0; j < ha.cols; ++j)
            if (ha.at(i, j) != hc.at(i, j)) {
                differs = true;
                break;
            }
    CHECK(differs);
}

TEST_CASE("predict_transition shapes per requested modality") {
    Backbone bb = Backbone::init(tiny_cfg());
    Rng rng(3);
    TokenStream ts = tiny_stream(rng, {Modality::image, Modality::video, Modality::audio});
    VarCache cache;
    cache.inference = true;
    auto out = predict_transition(bb, cache, ts);
    REQUIRE(out.size() == 3);
    for (auto& [m, v] : out) {
        CHECK(v->val.rows == 3);
        CHECK(v->val.cols == 16);
    }
    auto spans = locate_signal_spans(ts);
    ForwardOut fwd = backbone_forward(bb, cache, ts);
    for (auto& [m, span] : spans)
        for (int i = span.start; i < span.end; ++i)
            for (int j = 0; j < 16; ++j)
                CHECK(out.at(m)->val.at(i - span.start, j) == fwd.hidden->val.at(i, j));
}

TEST_CASE("adapter additivity: zero B means bit-equal to base forward") {
    ModelConfig cfg = tiny_cfg();
    Backbone with_ad = Backbone::init(cfg);
    ModelConfig cfg_no = cfg;
    cfg_no.adapter_targets = "";
    Backbone without = Backbone::init(cfg_no);
    // Copy base weights so the two models agree parameter-for-parameter.
    std::vector<Mat> vals;
    with_ad.for_each_tensor([&](Tensor& t) {
        if (t.component == "base") vals.push_back(t.value);
    });
    size_t i = 0;
    without.for_each_tensor([&](Tensor& t) {
        if (t.component == "base") t.value = vals[i++];
    });

    Rng rng(4);
    TokenStream ts = tiny_stream(rng);
    CHECK(forward_values(with_ad, ts).a == forward_values(without, ts).a);

    // Making B nonzero changes the output.
    with_ad.layers[0].ad_q.B.value.a[0] = 0.5;
    CHECK(forward_values(with_ad, ts).a != forward_values(without, ts).a);
}

TEST_CASE("set_freeze semantics and unknown components") {
    WorldModel model = WorldModel::init(tiny_cfg(), ReflectorConfig{});
    model.set_freeze("base", true);
    int frozen = 0, total = 0;
    model.for_each_tensor([&](Tensor& t) {
        ++total;
        if (t.frozen) {
            ++frozen;
            CHECK(t.component == "base");
        }
    });
    CHECK(frozen > 0);
    CHECK(frozen < total);
    model.set_freeze("all", false);
    model.for_each_tensor([&](Tensor& t) { CHECK(!t.frozen); });
    CHECK_THROWS_AS(model.set_freeze("no_such_component", true), Error);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    WorldModel model = WorldModel::init(tiny_cfg(), ReflectorConfig{2, 1, 2, 0, 0});
    const std::string path =
        (std::filesystem::temp_directory_path() / "worldkit_ckpt_test.json").string();
    std::array<uint64_t, 4> rng_state{1, 2, 3, 4};
    save_checkpoint(model, path, &rng_state);
    std::array<uint64_t, 4> loaded_state{};
    WorldModel loaded = load_checkpoint(path, &loaded_state);
    CHECK(loaded_state == rng_state);
    CHECK(model.all_checksums() == loaded.all_checksums());

    Rng rng(5);
    TokenStream ts = tiny_stream(rng);
    CHECK(model_predict(model, ts).at(Modality::image) ==
          model_predict(loaded, ts).at(Modality::image));

    // Saving the loaded model reproduces the same bytes.
    const std::string path2 = path + ".2";
    save_checkpoint(loaded, path2, &rng_state);
    CHECK(wk::read_file(path) == wk::read_file(path2));
}

TEST_CASE("tampered checkpoint is rejected") {
    WorldModel model = WorldModel::init(tiny_cfg(), ReflectorConfig{2, 1, 2, 0, 0});
    const std::string path =
        (std::filesystem::temp_directory_path() / "worldkit_ckpt_tamper.json").string();
    save_checkpoint(model, path);
    std::string text = wk::read_file(path);
    const auto pos = text.find("\"delim_emb\"");
    REQUIRE(pos != std::string::npos);
    // Flip a digit inside the tensor payload.
    auto dpos = text.find("0.0", pos);
    if (dpos == std::string::npos) dpos = text.find("0.", pos);
    REQUIRE(dpos != std::string::npos);
    text[dpos] = '9';
    wk::atomic_write(path, text);
    CHECK_THROWS_AS(load_checkpoint(path), Error);
}
