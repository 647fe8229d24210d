#pragma once

#include <map>
#include <string>
#include <vector>

#include "wk/cognition.hpp"
#include "wk/curriculum.hpp"
#include "wk/model.hpp"
#include "wk/synthworld.hpp"

namespace wk {

enum class LossKind { one_minus_cosine, mse };

double transition_loss(const Vec& pred, const Vec& target, LossKind kind);

// Paper-scale reference values (8xA100): pretrain batch 256 for 16 epochs,
// tuning batch 128 for 2 epochs. Desk defaults are far smaller.
struct TrainConfig {
    int batch_size = 6;
    int steps_per_epoch = 120;
    CurriculumSchedule schedule;
    bool curriculum = true;  // false: all classes from step 1
    LossKind loss = LossKind::one_minus_cosine;
    double render_loss_weight = 1.0;
    AdamConfig adam{3e-3, 0.9, 0.999, 1e-8};
    int warmup_steps = 100;
    double lr_min_ratio = 0.1;  // cosine floor as a fraction of adam.lr
    bool cosine_decay = true;
    uint64_t seed = 1;

    int total_steps() const { return steps_per_epoch * schedule.total_epochs; }
    double lr_at(int step) const;
};

struct CurvePoint {
    int step = 0;
    int epoch = 0;
    CompositionClass klass = CompositionClass::single_unimodal;
    double loss = 0.0;
};

struct LossCurve {
    std::vector<CurvePoint> points;

    // Mean loss of the last `window` recorded points of one class.
    double final_loss(CompositionClass klass, int window = 50) const;
};

std::string losscurve_csv(const LossCurve& curve);

// Progressive state-transition pretraining: per step, draw a batch, sample
// task specs under the classes allowed at the current epoch, frame without
// context, and update all unfrozen parameters.
LossCurve pretrain(WorldModel& model, const std::vector<TransitionSample>& data,
                   const TrainConfig& cfg);

struct TuneConfig {
    int batch_size = 6;
    int steps = 800;
    int retrieval_k = 1;
    double memory_fraction = 0.5;  // fraction of steps trained on memory-augmented batches
    int history_min = 2;
    int history_max = 5;
    LossKind loss = LossKind::one_minus_cosine;
    AdamConfig adam{5e-3, 0.9, 0.999, 1e-8};
    int warmup_steps = 50;
    double lr_min_ratio = 0.1;
    bool cosine_decay = true;
    uint64_t seed = 2;

    double lr_at(int step) const;
};

// Cognitive-augmented tuning: backbone, adapters and heads are frozen; only
// the reflector trains, on knowledge-augmented batches (top-k retrieval from
// the per-scenario KBs) and memory-augmented batches (history length uniform
// in [history_min, history_max]).
LossCurve cognitive_tune(WorldModel& model, const std::vector<TransitionSample>& tune_data,
                         const std::vector<Episode>& episodes,
                         const std::map<std::string, KnowledgeBase>& kbs, const TuneConfig& cfg);

// ------------------------------------------------------- gradient checks

struct GradCheckEntry {
    std::string tensor;
    int index = 0;
    double analytic = 0.0;
    double fd = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    GradCheckEntry worst;
    int entries_checked = 0;
    std::vector<std::string> skipped_frozen;
};

// Guarded relative error: |a-b| / max(|a|, |b|, 0.01), an absolute floor of
// 1e-6 at the 1e-4 threshold for near-zero gradients.
double grad_rel_err(double analytic, double fd);

GradCheckReport grad_check_compare(const std::map<std::string, Mat>& analytic,
                                   const std::map<std::string, Mat>& fd);

// Central finite differences of the probe loss against analytic gradients
// for every unfrozen tensor of the selected components. Probe samples get a
// reflected context attached so the reflector path is exercised.
GradCheckReport grad_check(WorldModel& model, const std::vector<TransitionSample>& probe,
                           const std::vector<std::string>& components, double h = 1e-4);

}  // namespace wk
