#include <doctest.h>

#include <cmath>
#include <map>

#include "wk/curriculum.hpp"

using namespace wk;

namespace {
const std::set<Modality> I{Modality::image};
const std::set<Modality> V{Modality::video};
const std::set<Modality> A{Modality::audio};
const std::set<Modality> IV{Modality::image, Modality::video};
const std::set<Modality> IA{Modality::image, Modality::audio};
const std::set<Modality> VA{Modality::video, Modality::audio};
const std::set<Modality> IVA{Modality::image, Modality::video, Modality::audio};
}  // namespace

TEST_CASE("classify_composition on the canonical cases") {
    CHECK(classify_composition(I, I) == CompositionClass::single_unimodal);
    CHECK(classify_composition(I, V) == CompositionClass::single_crossmodal);
    CHECK(classify_composition(IA, V) == CompositionClass::multiple_crossmodal);
    CHECK(classify_composition(IV, I) == CompositionClass::multiple_unimodal);
    CHECK(classify_composition(I, VA) == CompositionClass::multiple_crossmodal);
    CHECK(classify_composition(IVA, IVA) == CompositionClass::multiple_unimodal);
    CHECK(classify_composition(V, IA) == CompositionClass::multiple_crossmodal);
    CHECK_THROWS_AS(classify_composition({}, I), Error);
    CHECK_THROWS_AS(classify_composition(I, {}), Error);
}

TEST_CASE("allowed_classes follows the staged schedule") {
    CurriculumSchedule sched;  // 4-epoch stages, 16 epochs
    CHECK(allowed_classes(sched, 2) ==
          std::set<CompositionClass>{CompositionClass::single_unimodal});
    CHECK(allowed_classes(sched, 6) ==
          std::set<CompositionClass>{CompositionClass::single_unimodal,
                                     CompositionClass::single_crossmodal});
    CHECK(allowed_classes(sched, 15).size() == 4);
    CHECK(allowed_classes(sched, 16).size() == 4);
    CHECK_THROWS_AS(allowed_classes(sched, 0), Error);
    CHECK_THROWS_AS(allowed_classes(sched, 17), Error);

    // Monotone growth.
    for (int e = 1; e < 16; ++e) {
        const auto now = allowed_classes(sched, e);
        const auto next = allowed_classes(sched, e + 1);
        for (CompositionClass c : now) CHECK(next.count(c));
    }
}

TEST_CASE("sample_task handles forced and impossible cases") {
    TransitionSample s;
    s.before.modalities[Modality::image] = Vec(4, 0.1);
    s.after.modalities[Modality::image] = Vec(4, 0.2);
    Rng rng(1);
    const TaskSpec forced =
        sample_task(s, {CompositionClass::single_unimodal}, rng);
    CHECK(forced.inputs == I);
    CHECK(forced.outputs == I);
    CHECK(forced.klass == CompositionClass::single_unimodal);

    CHECK_THROWS_AS(sample_task(s, {CompositionClass::multiple_crossmodal}, rng), Error);
}

TEST_CASE("sample_task distribution matches uniform over pairs") {
    TransitionSample s;
    for (Modality m : kStateModalities) {
        s.before.modalities[m] = Vec(4, 0.1);
        s.after.modalities[m] = Vec(4, 0.2);
    }
    const std::set<CompositionClass> all{
        CompositionClass::single_unimodal, CompositionClass::single_crossmodal,
        CompositionClass::multiple_unimodal, CompositionClass::multiple_crossmodal};
    const auto tasks = enumerate_tasks(s, all);
    CHECK(tasks.size() == 49);  // 7 nonempty input sets x 7 output sets

    // Exact class distribution from the enumeration.
    std::map<CompositionClass, int> expect;
    for (const auto& t : tasks) expect[t.klass]++;
    CHECK(expect[CompositionClass::single_unimodal] == 3);
    CHECK(expect[CompositionClass::single_crossmodal] == 6);
    CHECK(expect[CompositionClass::multiple_unimodal] == 16);
    CHECK(expect[CompositionClass::multiple_crossmodal] == 24);

    Rng rng(2);
    std::map<CompositionClass, int> seen;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) seen[sample_task(s, all, rng).klass]++;
    for (const auto& [klass, count] : expect) {
        const double p = count / 49.0;
        const double sigma = std::sqrt(draws * p * (1 - p));
        CHECK(std::fabs(seen[klass] - draws * p) < 3 * sigma);
    }
}

TEST_CASE("every sampled task satisfies its own class invariant") {
    TransitionSample s;
    s.before.modalities[Modality::image] = Vec(4, 0.1);
    s.before.modalities[Modality::audio] = Vec(4, 0.3);
    for (Modality m : kStateModalities) s.after.modalities[m] = Vec(4, 0.2);
    const std::set<CompositionClass> all{
        CompositionClass::single_unimodal, CompositionClass::single_crossmodal,
        CompositionClass::multiple_unimodal, CompositionClass::multiple_crossmodal};
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const TaskSpec t = sample_task(s, all, rng);
        CHECK(classify_composition(t.inputs, t.outputs) == t.klass);
        for (Modality m : t.inputs) CHECK(s.before.modalities.count(m));
        for (Modality m : t.outputs) CHECK(s.after.modalities.count(m));
    }
}

TEST_CASE("classify is order-insensitive (set semantics)") {
    std::set<Modality> a{Modality::audio, Modality::image};
    std::set<Modality> b{Modality::image, Modality::audio};
    CHECK(classify_composition(a, V) == classify_composition(b, V));
}
