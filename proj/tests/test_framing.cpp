#include <doctest.h>

#include "wk/framing.hpp"
#include "wk/rng.hpp"

using namespace wk;

namespace {

WorldState state_with(std::initializer_list<Modality> mods, int d_enc, Rng& rng) {
    WorldState s;
    for (Modality m : mods) {
        Vec e(d_enc);
        for (auto& x : e) x = rng.normal();
        s.modalities[m] = e;
    }
    return s;
}

ActionDesc action_of(int d_enc, Rng& rng) {
    Vec e(d_enc);
    for (auto& x : e) x = rng.normal();
    return ActionDesc{"whisk the bowl", e};
}

}  // namespace

TEST_CASE("frame_input layout for video+audio state requesting image") {
    Rng rng(1);
    WorldState s = state_with({Modality::video, Modality::audio}, 8, rng);
    ActionDesc a = action_of(8, rng);
    TokenStream ts = frame_input(s, a, {}, {Modality::image}, 4);

    REQUIRE(ts.tokens.size() == 2 * 3 + 1 + 4);
    CHECK(ts.tokens[0].kind == Token::Kind::Open);
    CHECK(ts.tokens[0].modality == Modality::video);
    CHECK(ts.tokens[1].kind == Token::Kind::Payload);
    CHECK(ts.tokens[2].kind == Token::Kind::Close);
    CHECK(ts.tokens[3].kind == Token::Kind::Open);
    CHECK(ts.tokens[3].modality == Modality::audio);
    CHECK(ts.tokens[6].kind == Token::Kind::ActionText);
    for (int i = 0; i < 4; ++i) {
        CHECK(ts.tokens[7 + i].kind == Token::Kind::Signal);
        CHECK(ts.tokens[7 + i].modality == Modality::image);
        CHECK(ts.tokens[7 + i].signal_index == i);
    }
    CHECK(pretty_print(ts) ==
          "<video> [*] </video> <audio> [*] </audio> [action] "
          "<SIG:image:0> <SIG:image:1> <SIG:image:2> <SIG:image:3>");
}

TEST_CASE("empty request and empty state are rejected") {
    Rng rng(2);
    WorldState s = state_with({Modality::image}, 8, rng);
    ActionDesc a = action_of(8, rng);
    CHECK_THROWS_AS(frame_input(s, a, {}, {}, 4), Error);
    CHECK_THROWS_AS(frame_input(WorldState{}, a, std::vector<ContextTokens>{}, {Modality::image}, 4), Error);
}

TEST_CASE("context token blocks come first, 4 tokens each") {
    Rng rng(3);
    WorldState s = state_with({Modality::image}, 8, rng);
    ActionDesc a = action_of(8, rng);
    std::vector<ContextTokens> ctx(2, ContextTokens{Mat(4, 16, 0.5)});
    TokenStream ts = frame_input(s, a, ctx, {Modality::image}, 4);
    for (int i = 0; i < 8; ++i) CHECK(ts.tokens[static_cast<size_t>(i)].kind == Token::Kind::Context);
    CHECK(ts.tokens[8].kind == Token::Kind::Open);
}

TEST_CASE("locate_signal_spans round trip") {
    Rng rng(4);
    WorldState s = state_with({Modality::image, Modality::video, Modality::audio}, 8, rng);
    ActionDesc a = action_of(8, rng);
    TokenStream ts = frame_input(s, a, {}, {Modality::image, Modality::audio}, 3);
    auto spans = locate_signal_spans(ts);
    REQUIRE(spans.size() == 2);
    CHECK(spans.at(Modality::image).end - spans.at(Modality::image).start == 3);
    CHECK(spans.at(Modality::audio).end - spans.at(Modality::audio).start == 3);
    // Disjoint.
    CHECK(spans.at(Modality::image).end <= spans.at(Modality::audio).start);

    // Same inputs, same spans.
    TokenStream ts2 = frame_input(s, a, {}, {Modality::image, Modality::audio}, 3);
    auto spans2 = locate_signal_spans(ts2);
    CHECK(spans2.at(Modality::image).start == spans.at(Modality::image).start);
}

TEST_CASE("mutated streams are rejected") {
    Rng rng(5);
    WorldState s = state_with({Modality::image}, 8, rng);
    ActionDesc a = action_of(8, rng);
    TokenStream good = frame_input(s, a, {}, {Modality::image, Modality::video}, 4);
    CHECK_NOTHROW(locate_signal_spans(good));

    SUBCASE("signal index gap") {
        TokenStream bad = good;
        for (auto& t : bad.tokens)
            if (t.kind == Token::Kind::Signal && t.modality == Modality::image && t.signal_index == 2)
                t.signal_index = 3;
        CHECK_THROWS_AS(locate_signal_spans(bad), Error);
    }
    SUBCASE("missing signal token") {
        TokenStream bad = good;
        bad.tokens.pop_back();
        CHECK_THROWS_AS(locate_signal_spans(bad), Error);
    }
    SUBCASE("context token after payload") {
        TokenStream bad = good;
        bad.tokens.push_back({Token::Kind::Context, Modality::text, 0, Vec(16, 0.0)});
        CHECK_THROWS_AS(locate_signal_spans(bad), Error);
    }
    SUBCASE("payload outside delimiters") {
        TokenStream bad = good;
        bad.tokens.insert(bad.tokens.begin(), {Token::Kind::Payload, Modality::image, 0, Vec(8, 0.1)});
        CHECK_THROWS_AS(locate_signal_spans(bad), Error);
    }
    SUBCASE("unrequested signal block") {
        TokenStream bad = good;
        for (int i = 0; i < 4; ++i)
            bad.tokens.push_back({Token::Kind::Signal, Modality::audio, i, {}});
        CHECK_THROWS_AS(locate_signal_spans(bad), Error);
    }
}

TEST_CASE("round trip property over random inputs") {
    Rng rng(6);
    for (int it = 0; it < 200; ++it) {
        const int n_in = 1 + rng.uniform_int(3);
        const int n_out = 1 + rng.uniform_int(3);
        WorldState s;
        for (int i = 0; i < n_in; ++i) {
            Vec e(4);
            for (auto& x : e) x = rng.normal();
            s.modalities[kStateModalities[static_cast<size_t>(rng.uniform_int(3))]] = e;
        }
        std::set<Modality> req;
        for (int i = 0; i < n_out; ++i) req.insert(kStateModalities[static_cast<size_t>(rng.uniform_int(3))]);
        ActionDesc a = action_of(4, rng);
        const int k_sig = 1 + rng.uniform_int(4);
        const int n_ctx = rng.uniform_int(3);
        std::vector<ContextTokens> ctx(static_cast<size_t>(n_ctx), ContextTokens{Mat(4, 8, 0.1)});
        TokenStream ts = frame_input(s, a, ctx, req, k_sig);
        auto spans = locate_signal_spans(ts);
        CHECK(spans.size() == req.size());
        for (Modality m : req) CHECK(spans.at(m).end - spans.at(m).start == k_sig);
    }
}

TEST_CASE("frame_description carries text and signals only") {
    TokenStream ts = frame_description(Vec(8, 0.25), {Modality::video}, 2);
    REQUIRE(ts.tokens.size() == 3);
    CHECK(ts.tokens[0].kind == Token::Kind::ActionText);
    CHECK(ts.tokens[1].kind == Token::Kind::Signal);
    auto spans = locate_signal_spans(ts);
    CHECK(spans.at(Modality::video).start == 1);
}
