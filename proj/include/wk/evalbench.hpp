#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wk/cognition.hpp"
#include "wk/model.hpp"
#include "wk/synthworld.hpp"
#include "wk/training.hpp"

namespace wk {

// The evaluation harness: the 8-task modality-combination matrix, variant
// comparisons (base / in-context / reflected on knowledge and memory), and
// long-sequence evaluation, all scored by cosine similarity in the unified
// encoding space.

enum class Variant { base, CK, RK, CM, RM };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct EvalTask {
    std::set<Modality> inputs;
    std::set<Modality> outputs;

    std::string label() const;
};

// The fixed 8-task matrix: image->image, video->video, audio->audio,
// image&audio->video, video&audio->image, image->video&audio,
// video->image&audio, image&video&audio->image&video&audio.
std::vector<EvalTask> matrix_tasks();

// A predictor maps (restricted input state, action, context rows) to one
// embedding per requested output modality. The model is one implementation;
// tests plug in oracle and random predictors.
struct Predictor {
    virtual ~Predictor() = default;
    virtual std::map<Modality, Vec> predict(const TransitionSample& sample,
                                            const std::set<Modality>& inputs,
                                            const std::set<Modality>& outputs,
                                            const std::vector<ContextTokens>& context) = 0;
};

struct ModelPredictor final : Predictor {
    WorldModel* model;
    explicit ModelPredictor(WorldModel& m) : model(&m) {}
    std::map<Modality, Vec> predict(const TransitionSample& sample,
                                    const std::set<Modality>& inputs,
                                    const std::set<Modality>& outputs,
                                    const std::vector<ContextTokens>& context) override;
};

// Reads the latent sidecar; ignores inputs and context. Upper bound.
struct OraclePredictor final : Predictor {
    const WorldSpec* world;
    const std::map<std::pair<int64_t, int>, SidecarEntry>* sidecar;
    OraclePredictor(const WorldSpec& w,
                    const std::map<std::pair<int64_t, int>, SidecarEntry>& sc)
        : world(&w), sidecar(&sc) {}
    std::map<Modality, Vec> predict(const TransitionSample& sample,
                                    const std::set<Modality>& inputs,
                                    const std::set<Modality>& outputs,
                                    const std::vector<ContextTokens>& context) override;
};

// Random unit vectors; scores concentrate near zero.
struct RandomPredictor final : Predictor {
    Rng rng;
    int d_enc;
    RandomPredictor(uint64_t seed, int d) : rng(seed), d_enc(d) {}
    std::map<Modality, Vec> predict(const TransitionSample& sample,
                                    const std::set<Modality>& inputs,
                                    const std::set<Modality>& outputs,
                                    const std::vector<ContextTokens>& context) override;
};

struct EvalReport {
    std::string kind;  // "matrix" or "sequences"
    std::vector<std::string> columns;      // task labels or sequence lengths
    std::vector<std::string> variants;     // row order
    // cells[variant][column] = per-output-modality percents, 1 decimal.
    std::map<std::string, std::map<std::string, std::vector<double>>> cells;
    int samples_per_cell = 0;
    std::string config_hash;
    uint64_t seed = 0;
};

struct MatrixEvalConfig {
    std::vector<Variant> variants{Variant::base, Variant::CK, Variant::RK};
    int retrieval_k = 1;
    std::string config_hash;
    uint64_t seed = 0;
    // Content hashes of the training data; overlap with the test set (or
    // between test set and any KB) raises DisjointnessViolation.
    std::set<uint64_t> train_hashes;
};

EvalReport eval_matrix(Predictor& predictor, WorldModel& model,
                       const std::vector<TransitionSample>& testset,
                       const std::map<std::string, KnowledgeBase>& kbs,
                       const MatrixEvalConfig& cfg);

struct SequenceEvalConfig {
    std::vector<Variant> variants{Variant::base, Variant::CM, Variant::RM};
    std::vector<int> lengths{1, 3, 5, 7};
    std::string config_hash;
    uint64_t seed = 0;
};

EvalReport eval_sequences(Predictor& predictor, WorldModel& model,
                          const std::vector<Episode>& episodes, const SequenceEvalConfig& cfg);

std::string report_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_csv(const EvalReport& report);
// Markdown renderer shaped like the reference tables; when with_reference
// is set, the published reference numbers are printed alongside, clearly
// marked as not reproducible at this scale.
std::string report_markdown(const EvalReport& report, bool with_reference = false);

void write_report(const EvalReport& report, const std::string& path_base);

// Mean of a report's cells across all columns and output modalities (0..1).
double report_overall_mean(const EvalReport& report, const std::string& variant);

}  // namespace wk
