#include "wk/curriculum.hpp"

#include <algorithm>

namespace wk {

const char* composition_name(CompositionClass c) {
    switch (c) {
        case CompositionClass::single_unimodal: return "single_unimodal";
        case CompositionClass::single_crossmodal: return "single_crossmodal";
        case CompositionClass::multiple_unimodal: return "multiple_unimodal";
        case CompositionClass::multiple_crossmodal: return "multiple_crossmodal";
    }
    return "?";
}

CompositionClass classify_composition(const std::set<Modality>& inputs,
                                      const std::set<Modality>& outputs) {
    if (inputs.empty() || outputs.empty())
        fail(Err::EmptySet, "classify_composition: empty modality set");
    for (const auto& s : {inputs, outputs})
        for (Modality m : s)
            if (m == Modality::text)
                fail(Err::UnknownModality, "classify_composition: text is not a state modality");
    const bool unimodal = std::includes(inputs.begin(), inputs.end(), outputs.begin(), outputs.end());
    const bool single = inputs.size() == 1 && outputs.size() == 1;
    if (single) return unimodal ? CompositionClass::single_unimodal : CompositionClass::single_crossmodal;
    return unimodal ? CompositionClass::multiple_unimodal : CompositionClass::multiple_crossmodal;
}

std::set<CompositionClass> allowed_classes(const CurriculumSchedule& schedule, int epoch) {
    if (epoch < 1 || epoch > schedule.total_epochs)
        fail(Err::EpochOutOfRange, "epoch " + std::to_string(epoch) + " outside 1.." +
                                       std::to_string(schedule.total_epochs));
    if (schedule.stage_epochs < 1) fail(Err::InvalidConfig, "stage_epochs must be >= 1");
    const int stages = (epoch + schedule.stage_epochs - 1) / schedule.stage_epochs;
    const int n = std::min<int>(stages, static_cast<int>(schedule.order.size()));
    std::set<CompositionClass> out;
    for (int i = 0; i < n; ++i) out.insert(schedule.order[static_cast<size_t>(i)]);
    return out;
}

std::vector<TaskSpec> enumerate_tasks(const TransitionSample& sample,
                                      const std::set<CompositionClass>& allowed) {
    std::vector<Modality> in_mods, out_mods;
    for (const auto& [m, e] : sample.before.modalities) in_mods.push_back(m);
    for (const auto& [m, e] : sample.after.modalities) out_mods.push_back(m);
    std::vector<TaskSpec> out;
    const int n_in = static_cast<int>(in_mods.size());
    const int n_out = static_cast<int>(out_mods.size());
    for (int bi = 1; bi < (1 << n_in); ++bi) {
        std::set<Modality> inputs;
        for (int i = 0; i < n_in; ++i)
            if (bi & (1 << i)) inputs.insert(in_mods[static_cast<size_t>(i)]);
        for (int bo = 1; bo < (1 << n_out); ++bo) {
            std::set<Modality> outputs;
            for (int i = 0; i < n_out; ++i)
                if (bo & (1 << i)) outputs.insert(out_mods[static_cast<size_t>(i)]);
            const CompositionClass klass = classify_composition(inputs, outputs);
            if (allowed.count(klass)) out.push_back(TaskSpec{inputs, outputs, klass});
        }
    }
    return out;
}

TaskSpec sample_task(const TransitionSample& sample, const std::set<CompositionClass>& allowed,
                     Rng& rng) {
    const auto tasks = enumerate_tasks(sample, allowed);
    if (tasks.empty())
        fail(Err::NoRealizableTask,
             "no realizable task for episode " + std::to_string(sample.episode_id) + " step " +
                 std::to_string(sample.step_index));
    return tasks[static_cast<size_t>(rng.uniform_int(static_cast<int>(tasks.size())))];
}

}  // namespace wk
