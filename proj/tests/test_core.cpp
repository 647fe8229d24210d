#include <doctest.h>

#include "wk/core.hpp"
#include "wk/mat.hpp"
#include "wk/rng.hpp"

using namespace wk;

namespace {

TransitionSample make_sample(Rng& rng, int d_enc, int n_mods = 2) {
    TransitionSample s;
    for (int i = 0; i < n_mods; ++i) {
        Vec e(d_enc);
        for (auto& x : e) x = rng.normal();
        s.before.modalities[kStateModalities[i]] = e;
        for (auto& x : e) x = rng.normal();
        s.after.modalities[kStateModalities[i]] = e;
    }
    Vec a(d_enc);
    for (auto& x : a) x = rng.normal();
    s.action = ActionDesc{"poke the thing", a};
    s.scenario = "s";
    return s;
}

}  // namespace

TEST_CASE("cosine_similarity basics") {
    Vec v{0.3, -1.2, 2.0};
    CHECK(cosine_similarity(v, v) == doctest::Approx(1.0));
    CHECK(cosine_similarity({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(cosine_similarity({1, 1}, {1, 0}) == doctest::Approx(0.70710678).epsilon(1e-8));
}

TEST_CASE("cosine_similarity errors") {
    CHECK_THROWS_AS(cosine_similarity({1, 0}, {1, 0, 0}), Error);
    try {
        cosine_similarity({0, 0}, {1, 0});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind == Err::ZeroVector);
    }
}

TEST_CASE("cosine symmetry and positive-scale invariance") {
    Rng rng(11);
    for (int it = 0; it < 200; ++it) {
        Vec a(8), b(8);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = rng.normal();
        const double c = rng.uniform(0.01, 50.0);
        CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-12));
        Vec ca(a);
        for (auto& x : ca) x *= c;
        CHECK(cosine_similarity(ca, b) ==
              doctest::Approx(cosine_similarity(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("normalize") {
    const Vec n = normalize({3, 4});
    CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(norm2(normalize(n)) == doctest::Approx(1.0).epsilon(1e-9));

    try {
        normalize({0.0, 0.0});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind == Err::ZeroVector);
    }
}

TEST_CASE("unified_encode determinism and shape") {
    Rng rng(7);
    TransitionSample s = make_sample(rng, 16);
    const Vec k1 = unified_encode(s);
    const Vec k2 = unified_encode(s);
    CHECK(k1 == k2);  // bit-exact
    CHECK(k1.size() == 32);
    CHECK(norm2(k1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("unified_encode single modality unrolls the definition") {
    Rng rng(9);
    TransitionSample s = make_sample(rng, 8, 1);
    const Vec key = unified_encode(s);
    const Vec ne = normalize(s.before.modalities.begin()->second);
    const Vec na = normalize(s.action.embedding);
    Vec expect;
    expect.insert(expect.end(), ne.begin(), ne.end());
    expect.insert(expect.end(), na.begin(), na.end());
    expect = normalize(expect);
    for (size_t i = 0; i < key.size(); ++i)
        CHECK(key[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("unified_encode depends on embeddings only, not action text") {
    Rng rng(13);
    TransitionSample s1 = make_sample(rng, 8);
    TransitionSample s2 = s1;
    s2.action.text = "completely different words";
    CHECK(unified_encode(s1) == unified_encode(s2));
}

TEST_CASE("unified_encode invariant to modality insertion order") {
    Rng rng(17);
    TransitionSample s = make_sample(rng, 8, 3);
    WorldState reordered;
    for (auto it = s.before.modalities.rbegin(); it != s.before.modalities.rend(); ++it)
        reordered.modalities[it->first] = it->second;
    TransitionSample s2 = s;
    s2.before = reordered;
    CHECK(unified_encode(s) == unified_encode(s2));
}

TEST_CASE("sample_content_hash distinguishes samples") {
    Rng rng(23);
    TransitionSample a = make_sample(rng, 8);
    TransitionSample b = a;
    CHECK(sample_content_hash(a) == sample_content_hash(b));
    b.after.modalities.begin()->second[0] += 1e-9;
    CHECK(sample_content_hash(a) != sample_content_hash(b));
}
