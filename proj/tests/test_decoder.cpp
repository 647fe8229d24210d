#include <doctest.h>

#include <cmath>

#include "wk/decoder.hpp"
#include "wk/model.hpp"

using namespace wk;

TEST_CASE("head_forward shape and zero-weight case") {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.d_enc = 8;
    cfg.k_sig = 4;
    Rng rng(1);
    SignalHead head = SignalHead::init(Modality::image, Space::unified, cfg, rng);
    VarCache cache;
    cache.inference = true;
    ag::Var hidden = ag::constant(Mat::randn(4, 16, 1.0, rng));
    ag::Var out = head_forward(head, cache, hidden);
    CHECK(out->val.rows == 1);
    CHECK(out->val.cols == 8);

    head.out_w.value = Mat(16, 8);
    head.out_b.value = Mat(1, 8);
    VarCache c2;
    c2.inference = true;
    ag::Var z = head_forward(head, c2, hidden);
    for (double v : z->val.a) CHECK(v == 0.0);
}

TEST_CASE("head gradient wrt hidden matches finite differences") {
    ModelConfig cfg;
    cfg.d_model = 12;
    cfg.d_enc = 6;
    Rng rng(2);
    SignalHead head = SignalHead::init(Modality::video, Space::unified, cfg, rng);
    Mat hidden = Mat::randn(3, 12, 0.8, rng);
    Vec target(6);
    for (auto& x : target) x = rng.normal();

    VarCache cache;
    ag::Var hv = ag::leaf(hidden);
    ag::Var loss = ag::loss_one_minus_cosine(head_forward(head, cache, hv), target);
    ag::backward(loss);

    auto eval = [&](const Mat& h) {
        VarCache c2;
        c2.inference = true;
        return ag::loss_one_minus_cosine(head_forward(head, c2, ag::constant(h)), target)->val.a[0];
    };
    const double h = 1e-5;
    double worst = 0.0;
    for (size_t i = 0; i < hidden.a.size(); ++i) {
        Mat hp = hidden, hm = hidden;
        hp.a[i] += h;
        hm.a[i] -= h;
        const double fd = (eval(hp) - eval(hm)) / (2 * h);
        const double an = hv->grad.a[i];
        worst = std::max(worst, std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-3}));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("render and unified heads share nothing") {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.d_enc = 8;
    cfg.seed = 3;
    WorldModel m = WorldModel::init(cfg, ReflectorConfig{});
    Rng rng(4);
    Mat hidden = Mat::randn(4, 16, 0.7, rng);
    VarCache c1;
    c1.inference = true;
    const Vec before = head_forward(m.head(Modality::image, Space::unified), c1,
                                    ag::constant(hidden))->val.a;
    m.head(Modality::image, Space::render).wv.value.a[7] = 123.0;
    m.head(Modality::image, Space::render).out_w.value.a[3] = -55.0;
    VarCache c2;
    c2.inference = true;
    const Vec after = head_forward(m.head(Modality::image, Space::unified), c2,
                                   ag::constant(hidden))->val.a;
    CHECK(before == after);
}

TEST_CASE("fit_agent_projector recovers a planted affine map") {
    const int d_in = 16, d_out = 10;
    Rng rng(5);
    Mat W = Mat::randn(d_in, d_out, 1.0, rng);
    Vec b(d_out);
    for (auto& x : b) x = rng.normal();

    std::vector<std::pair<Vec, Vec>> pairs;
    for (int n = 0; n < 4 * d_in; ++n) {
        Vec x(d_in);
        for (auto& v : x) v = rng.normal();
        Vec y(b);
        for (int j = 0; j < d_out; ++j)
            for (int i = 0; i < d_in; ++i)
                y[static_cast<size_t>(j)] += x[static_cast<size_t>(i)] * W.at(i, j);
        pairs.emplace_back(x, y);
    }
    AgentProjector p = fit_agent_projector(pairs);
    CHECK(!p.rank_deficient);
    CHECK(p.residual < 1e-12);
    double max_err = 0.0;
    for (int i = 0; i < d_in; ++i)
        for (int j = 0; j < d_out; ++j)
            max_err = std::max(max_err, std::fabs(p.W.at(i, j) - W.at(i, j)));
    for (int j = 0; j < d_out; ++j)
        max_err = std::max(max_err, std::fabs(p.b[static_cast<size_t>(j)] - b[static_cast<size_t>(j)]));
    CHECK(max_err < 1e-8);
}

TEST_CASE("fit_agent_projector identity fit") {
    const int d = 8;
    Rng rng(6);
    std::vector<std::pair<Vec, Vec>> pairs;
    for (int n = 0; n < 3 * d; ++n) {
        Vec x(d);
        for (auto& v : x) v = rng.normal();
        pairs.emplace_back(x, x);
    }
    AgentProjector p = fit_agent_projector(pairs);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            CHECK(p.W.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));
    for (double v : p.b) CHECK(std::fabs(v) < 1e-8);
}

TEST_CASE("single pair is rank deficient with zero residual") {
    Rng rng(7);
    Vec x(64), y(16);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    AgentProjector p = fit_agent_projector({{x, y}});
    CHECK(p.rank_deficient);
    CHECK(p.residual < 1e-16);
    const Vec pred = p.apply(x);
    for (size_t j = 0; j < y.size(); ++j) CHECK(pred[j] == doctest::Approx(y[j]).epsilon(1e-8));
}

TEST_CASE("projector json round trip") {
    Rng rng(8);
    std::vector<std::pair<Vec, Vec>> pairs;
    for (int n = 0; n < 20; ++n) {
        Vec x(4), y(3);
        for (auto& v : x) v = rng.normal();
        for (auto& v : y) v = rng.normal();
        pairs.emplace_back(x, y);
    }
    AgentProjector p = fit_agent_projector(pairs);
    AgentProjector q = projector_from_json(projector_to_json(p));
    CHECK(p.W.a == q.W.a);
    CHECK(p.b == q.b);
    CHECK(p.residual == q.residual);
}
