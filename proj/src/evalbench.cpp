#include "wk/evalbench.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "wk/dataset_io.hpp"

namespace wk {

using nlohmann::json;

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::base: return "base";
        case Variant::CK: return "CK";
        case Variant::RK: return "RK";
        case Variant::CM: return "CM";
        case Variant::RM: return "RM";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    for (Variant v : {Variant::base, Variant::CK, Variant::RK, Variant::CM, Variant::RM})
        if (name == variant_name(v)) return v;
    fail(Err::InvalidConfig, "unknown variant: " + name);
}

std::string EvalTask::label() const {
    std::string in, out;
    for (Modality m : inputs) {
        if (!in.empty()) in += "&";
        in += modality_name(m);
    }
    for (Modality m : outputs) {
        if (!out.empty()) out += "&";
        out += modality_name(m);
    }
    return in + "->" + out;
}

std::vector<EvalTask> matrix_tasks() {
    const std::set<Modality> I{Modality::image}, V{Modality::video}, A{Modality::audio};
    const std::set<Modality> IA{Modality::image, Modality::audio};
    const std::set<Modality> VA{Modality::video, Modality::audio};
    const std::set<Modality> IVA{Modality::image, Modality::video, Modality::audio};
    return {
        EvalTask{I, I},  EvalTask{V, V},  EvalTask{A, A},  EvalTask{IA, V},
        EvalTask{VA, I}, EvalTask{I, VA}, EvalTask{V, IA}, EvalTask{IVA, IVA},
    };
}

namespace {

WorldState restrict_state(const WorldState& s, const std::set<Modality>& keep) {
    WorldState out;
    out.text = s.text;
    for (const auto& [m, e] : s.modalities)
        if (keep.count(m)) out.modalities[m] = e;
    return out;
}

double round1(double percent) { return std::round(percent * 10.0) / 10.0; }

}  // namespace

std::map<Modality, Vec> ModelPredictor::predict(const TransitionSample& sample,
                                                const std::set<Modality>& inputs,
                                                const std::set<Modality>& outputs,
                                                const std::vector<ContextTokens>& context) {
    TokenStream stream = frame_input(restrict_state(sample.before, inputs), sample.action,
                                     context, outputs, model->cfg.k_sig);
    return model_predict(*model, stream, Space::unified);
}

std::map<Modality, Vec> OraclePredictor::predict(const TransitionSample& sample,
                                                 const std::set<Modality>& inputs,
                                                 const std::set<Modality>& outputs,
                                                 const std::vector<ContextTokens>& context) {
    (void)inputs;
    (void)context;
    auto it = sidecar->find({sample.episode_id, sample.step_index});
    if (it == sidecar->end()) fail(Err::DataError, "oracle: sample missing from sidecar");
    std::map<Modality, Vec> out;
    for (Modality m : outputs) out[m] = observe(*world, it->second.z_after, m);
    return out;
}

std::map<Modality, Vec> RandomPredictor::predict(const TransitionSample& sample,
                                                 const std::set<Modality>& inputs,
                                                 const std::set<Modality>& outputs,
                                                 const std::vector<ContextTokens>& context) {
    (void)sample;
    (void)inputs;
    (void)context;
    std::map<Modality, Vec> out;
    for (Modality m : outputs) {
        Vec v(d_enc);
        for (auto& x : v) x = rng.normal();
        out[m] = normalize(v);
    }
    return out;
}

namespace {

// Context blocks for one (sample, variant); an empty or missing KB reduces
// every variant to base.
std::vector<ContextTokens> knowledge_context(WorldModel& model, const TransitionSample& s,
                                             const std::map<std::string, KnowledgeBase>& kbs,
                                             Variant variant, int k) {
    if (variant == Variant::base) return {};
    auto it = kbs.find(s.scenario);
    if (it == kbs.end() || it->second.entries.empty()) return {};
    const auto hits = kb_retrieve(it->second, s.before, s.action, k);
    std::vector<ContextTokens> blocks;
    if (variant == Variant::CK) {
        for (const auto& hit : hits)
            blocks.push_back(ContextTokens{encode_context(model.lift, *hit.sample)});
    } else {
        const Vec cond = encode_condition(s.before, s.action);
        for (const auto& hit : hits)
            blocks.push_back(reflect(model.reflector, encode_context(model.lift, *hit.sample), cond));
    }
    return blocks;
}

struct CellAccum {
    std::map<Modality, KahanSum> sums;
    int count = 0;
};

}  // namespace

EvalReport eval_matrix(Predictor& predictor, WorldModel& model,
                       const std::vector<TransitionSample>& testset,
                       const std::map<std::string, KnowledgeBase>& kbs,
                       const MatrixEvalConfig& cfg) {
    // Disjointness gate before any scoring.
    std::set<uint64_t> test_hashes;
    for (const auto& s : testset) test_hashes.insert(sample_content_hash(s));
    for (uint64_t h : test_hashes)
        if (cfg.train_hashes.count(h))
            fail(Err::DisjointnessViolation, "test sample appears in the training data");
    for (const auto& [scen, kb] : kbs)
        for (const auto& e : kb.entries) {
            const uint64_t h = sample_content_hash(e.sample);
            if (test_hashes.count(h))
                fail(Err::DisjointnessViolation, "test sample appears in knowledge base " + scen);
            if (cfg.train_hashes.count(h))
                fail(Err::DisjointnessViolation, "knowledge base overlaps the training data");
        }

    EvalReport report;
    report.kind = "matrix";
    report.config_hash = cfg.config_hash;
    report.seed = cfg.seed;

    const auto tasks = matrix_tasks();
    for (const auto& t : tasks) report.columns.push_back(t.label());
    for (Variant v : cfg.variants) report.variants.push_back(variant_name(v));

    for (Variant variant : cfg.variants) {
        for (const auto& task : tasks) {
            CellAccum acc;
            for (const auto& s : testset) {
                bool usable = true;
                for (Modality m : task.inputs)
                    if (!s.before.modalities.count(m)) usable = false;
                for (Modality m : task.outputs)
                    if (!s.after.modalities.count(m)) usable = false;
                if (!usable) continue;
                const auto ctx = knowledge_context(model, s, kbs, variant, cfg.retrieval_k);
                const auto pred = predictor.predict(s, task.inputs, task.outputs, ctx);
                for (Modality m : task.outputs)
                    acc.sums[m].add(cosine_similarity(pred.at(m), s.after.modalities.at(m)));
                ++acc.count;
            }
            std::vector<double> cell;
            for (Modality m : task.outputs)
                cell.push_back(acc.count ? round1(100.0 * acc.sums[m].sum / acc.count) : 0.0);
            report.cells[variant_name(variant)][task.label()] = cell;
            report.samples_per_cell = acc.count;
        }
    }
    return report;
}

EvalReport eval_sequences(Predictor& predictor, WorldModel& model,
                          const std::vector<Episode>& episodes, const SequenceEvalConfig& cfg) {
    int max_len = 0;
    for (int l : cfg.lengths) max_len = std::max(max_len, l);
    for (const auto& ep : episodes)
        if (static_cast<int>(ep.samples.size()) < max_len)
            fail(Err::EpisodeTooShort, "episode " + std::to_string(ep.episode_id) + " has " +
                                           std::to_string(ep.samples.size()) +
                                           " transitions, need " + std::to_string(max_len));

    EvalReport report;
    report.kind = "sequences";
    report.config_hash = cfg.config_hash;
    report.seed = cfg.seed;
    for (int l : cfg.lengths) report.columns.push_back(std::to_string(l));
    for (Variant v : cfg.variants) report.variants.push_back(variant_name(v));

    for (Variant variant : cfg.variants) {
        std::map<int, KahanSum> sums;
        std::map<int, int> counts;
        for (const auto& ep : episodes) {
            MemoryStore store;
            for (int t = 0; t < max_len; ++t) {
                const TransitionSample& s = ep.samples[static_cast<size_t>(t)];
                std::set<Modality> inputs, outputs;
                for (const auto& [m, e] : s.before.modalities) inputs.insert(m);
                for (const auto& [m, e] : s.after.modalities) outputs.insert(m);

                std::vector<ContextTokens> ctx;
                if (variant != Variant::base && t > 0 && store.has_episode(ep.episode_id)) {
                    if (variant == Variant::CM) {
                        for (auto& block : memory_recall_raw(store, ep.episode_id, t, model.lift))
                            ctx.push_back(ContextTokens{std::move(block)});
                    } else {
                        const Vec cond = encode_condition(s.before, s.action);
                        for (auto& block : memory_recall_reflected(store, ep.episode_id, t,
                                                                   model.lift, model.reflector,
                                                                   cond))
                            ctx.push_back(std::move(block));
                    }
                }
                const auto pred = predictor.predict(s, inputs, outputs, ctx);
                if (std::find(cfg.lengths.begin(), cfg.lengths.end(), t + 1) !=
                    cfg.lengths.end()) {
                    for (Modality m : outputs) {
                        sums[t + 1].add(cosine_similarity(pred.at(m), s.after.modalities.at(m)));
                        counts[t + 1] += 1;
                    }
                }
                MemoryEntry entry;
                entry.step_index = t;
                entry.state = s.before;
                entry.action = s.action;
                entry.prediction = pred;
                store.append(ep.episode_id, entry);
            }
        }
        for (int l : cfg.lengths) {
            const double mean = counts[l] ? sums[l].sum / counts[l] : 0.0;
            report.cells[variant_name(variant)][std::to_string(l)] = {round1(100.0 * mean)};
        }
        report.samples_per_cell = static_cast<int>(episodes.size());
    }
    return report;
}

std::string report_json(const EvalReport& report) {
    json j;
    j["kind"] = report.kind;
    j["columns"] = report.columns;
    j["variants"] = report.variants;
    j["cells"] = report.cells;
    j["samples_per_cell"] = report.samples_per_cell;
    j["config_hash"] = report.config_hash;
    j["seed"] = report.seed;
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
    json j = json::parse(text);
    EvalReport r;
    r.kind = j.at("kind").get<std::string>();
    r.columns = j.at("columns").get<std::vector<std::string>>();
    r.variants = j.at("variants").get<std::vector<std::string>>();
    r.cells =
        j.at("cells").get<std::map<std::string, std::map<std::string, std::vector<double>>>>();
    r.samples_per_cell = j.at("samples_per_cell").get<int>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    return r;
}

namespace {

std::string cell_str(const std::vector<double>& cell) {
    std::string out;
    for (size_t i = 0; i < cell.size(); ++i) {
        if (i) out += "/";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", cell[i]);
        out += buf;
    }
    return out;
}

// Published full-scale reference scores, printed for comparison only; not
// reproducible at desk scale.
const std::map<std::string, std::vector<std::vector<double>>>& matrix_reference() {
    static const std::map<std::string, std::vector<std::vector<double>>> ref = {
        {"base",
         {{71.6}, {72.2}, {45.6}, {58.0}, {79.2}, {65.2, 41.7}, {79.6, 34.6}, {78.0, 82.7, 37.1}}},
        {"CK",
         {{72.4}, {72.0}, {44.3}, {58.3}, {79.1}, {65.6, 41.2}, {76.1, 33.4}, {75.7, 74.1, 34.1}}},
        {"RK",
         {{75.6}, {76.4}, {50.1}, {62.7}, {81.5}, {71.6, 45.3}, {82.4, 43.6}, {80.1, 82.5, 42.4}}},
    };
    return ref;
}

const std::map<std::string, std::vector<double>>& sequence_reference() {
    static const std::map<std::string, std::vector<double>> ref = {
        {"base", {72.5, 72.3, 72.6, 73.1}},
        {"CM", {72.5, 72.1, 71.8, 69.6}},
        {"RM", {72.5, 74.1, 74.4, 73.8}},
    };
    return ref;
}

}  // namespace

std::string report_csv(const EvalReport& report) {
    std::string out = "variant";
    for (const auto& c : report.columns) out += "," + c;
    out += "\n";
    for (const auto& v : report.variants) {
        out += v;
        for (const auto& c : report.columns) out += "," + cell_str(report.cells.at(v).at(c));
        out += "\n";
    }
    out += "# samples_per_cell=" + std::to_string(report.samples_per_cell) +
           " config_hash=" + report.config_hash + " seed=" + std::to_string(report.seed) + "\n";
    return out;
}

std::string report_markdown(const EvalReport& report, bool with_reference) {
    std::string out = "| variant |";
    for (const auto& c : report.columns) out += " " + c + " |";
    out += "\n|---|";
    for (size_t i = 0; i < report.columns.size(); ++i) out += "---|";
    out += "\n";
    for (const auto& v : report.variants) {
        out += "| " + v + " |";
        for (const auto& c : report.columns) out += " " + cell_str(report.cells.at(v).at(c)) + " |";
        out += "\n";
    }
    if (with_reference) {
        out += "\nPublished full-scale reference (not reproducible at this scale):\n";
        if (report.kind == "matrix") {
            for (const auto& v : report.variants) {
                auto it = matrix_reference().find(v);
                if (it == matrix_reference().end()) continue;
                out += "| " + v + " (reference) |";
                for (const auto& cell : it->second) out += " " + cell_str(cell) + " |";
                out += "\n";
            }
        } else {
            for (const auto& v : report.variants) {
                auto it = sequence_reference().find(v);
                if (it == sequence_reference().end()) continue;
                out += "| " + v + " (reference) |";
                for (double x : it->second) out += " " + cell_str({x}) + " |";
                out += "\n";
            }
        }
    }
    out += "\nsamples_per_cell=" + std::to_string(report.samples_per_cell) +
           " config_hash=" + report.config_hash + " seed=" + std::to_string(report.seed) + "\n";
    return out;
}

void write_report(const EvalReport& report, const std::string& path_base) {
    atomic_write(path_base + ".json", report_json(report));
    atomic_write(path_base + ".csv", report_csv(report));
    atomic_write(path_base + ".md", report_markdown(report));
}

double report_overall_mean(const EvalReport& report, const std::string& variant) {
    KahanSum sum;
    int n = 0;
    for (const auto& [col, cell] : report.cells.at(variant))
        for (double x : cell) {
            sum.add(x / 100.0);
            ++n;
        }
    return n ? sum.sum / n : 0.0;
}

}  // namespace wk
