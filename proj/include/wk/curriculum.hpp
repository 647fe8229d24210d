#pragma once

#include <set>
#include <vector>

#include "wk/core.hpp"
#include "wk/rng.hpp"

namespace wk {

// Modality-composition difficulty classes, in increasing difficulty order.
// single: one input modality and one output modality; unimodal: outputs are
// a subset of inputs.
enum class CompositionClass {
    single_unimodal = 0,
    single_crossmodal = 1,
    multiple_unimodal = 2,
    multiple_crossmodal = 3,
};

const char* composition_name(CompositionClass c);

CompositionClass classify_composition(const std::set<Modality>& inputs,
                                      const std::set<Modality>& outputs);

struct CurriculumSchedule {
    int stage_epochs = 4;
    int total_epochs = 16;
    std::vector<CompositionClass> order = {
        CompositionClass::single_unimodal,
        CompositionClass::single_crossmodal,
        CompositionClass::multiple_unimodal,
        CompositionClass::multiple_crossmodal,
    };
};

// Cumulative prefix of the class order: ceil(epoch / stage_epochs) classes,
// capped at the full list. Epochs are 1-based.
std::set<CompositionClass> allowed_classes(const CurriculumSchedule& schedule, int epoch);

struct TaskSpec {
    std::set<Modality> inputs;
    std::set<Modality> outputs;
    CompositionClass klass;
};

// Uniform draw over the realizable (inputs, outputs) pairs whose class is
// allowed; inputs come from the sample's available before-state modalities,
// outputs from its after-state modalities.
TaskSpec sample_task(const TransitionSample& sample, const std::set<CompositionClass>& allowed,
                     Rng& rng);

// All realizable pairs (used by sample_task and by the distribution oracle
// in tests).
std::vector<TaskSpec> enumerate_tasks(const TransitionSample& sample,
                                      const std::set<CompositionClass>& allowed);

}  // namespace wk
