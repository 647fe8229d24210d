#include "wk/training.hpp"

#include <algorithm>
#include <cmath>

namespace wk {

using ag::Var;

double transition_loss(const Vec& pred, const Vec& target, LossKind kind) {
    if (pred.size() != target.size())
        fail(Err::DimensionMismatch, "transition_loss: dim mismatch");
    if (kind == LossKind::one_minus_cosine) return 1.0 - cosine_similarity(pred, target);
    double s = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

double TrainConfig::lr_at(int step) const {
    const double base = adam.lr;
    if (warmup_steps > 0 && step < warmup_steps)
        return base * (step + 1) / static_cast<double>(warmup_steps);
    if (!cosine_decay) return base;
    const double t = static_cast<double>(step - warmup_steps) /
                     std::max(1, total_steps() - warmup_steps);
    const double floor = base * lr_min_ratio;
    return floor + 0.5 * (base - floor) * (1.0 + std::cos(3.14159265358979323846 * t));
}

double TuneConfig::lr_at(int step) const {
    const double base = adam.lr;
    if (warmup_steps > 0 && step < warmup_steps)
        return base * (step + 1) / static_cast<double>(warmup_steps);
    if (!cosine_decay) return base;
    const double t =
        static_cast<double>(step - warmup_steps) / std::max(1, steps - warmup_steps);
    const double floor = base * lr_min_ratio;
    return floor + 0.5 * (base - floor) * (1.0 + std::cos(3.14159265358979323846 * t));
}

double LossCurve::final_loss(CompositionClass klass, int window) const {
    KahanSum sum;
    int n = 0;
    for (auto it = points.rbegin(); it != points.rend() && n < window; ++it) {
        if (it->klass != klass) continue;
        sum.add(it->loss);
        ++n;
    }
    return n ? sum.sum / n : std::nan("");
}

std::string losscurve_csv(const LossCurve& curve) {
    std::string out = "step,epoch,class,loss\n";
    for (const auto& p : curve.points) {
        out += std::to_string(p.step) + "," + std::to_string(p.epoch) + "," +
               composition_name(p.klass) + "," + fmt17(p.loss) + "\n";
    }
    return out;
}

namespace {

Var loss_of(const Var& pred, const Vec& target, LossKind kind) {
    return kind == LossKind::one_minus_cosine ? ag::loss_one_minus_cosine(pred, target)
                                              : ag::loss_mse(pred, target);
}

WorldState restrict_state(const WorldState& s, const std::set<Modality>& keep) {
    WorldState out;
    out.text = s.text;
    for (const auto& [m, e] : s.modalities)
        if (keep.count(m)) out.modalities[m] = e;
    return out;
}

// Per-item losses for one framed transition. Returns the unified-space loss
// (what the curve records); adds the render-space term into `objective`.
Var item_losses(WorldModel& model, VarCache& cache, const TokenStream& stream,
                const WorldState& target_state, LossKind kind, double render_weight,
                std::vector<Var>& objective_terms,
                const std::vector<Var>* context_override = nullptr) {
    auto hiddens = predict_transition(model.backbone, cache, stream, context_override);
    std::vector<Var> unified;
    for (auto& [m, hv] : hiddens) {
        const Vec& target = target_state.modalities.at(m);
        Var pu = head_forward(model.head(m, Space::unified), cache, hv);
        unified.push_back(loss_of(pu, target, kind));
        if (render_weight > 0.0) {
            Var pr = head_forward(model.head(m, Space::render), cache, hv);
            objective_terms.push_back(
                ag::scale(loss_of(pr, model.render_target(m, target), kind), render_weight));
        }
    }
    Var u = ag::mean_scalars(unified);
    objective_terms.push_back(u);
    return u;
}

void check_finite(double loss, int step, int epoch) {
    if (!std::isfinite(loss))
        fail(Err::NonFiniteLoss, "non-finite loss at step " + std::to_string(step) + " epoch " +
                                     std::to_string(epoch));
}

}  // namespace

LossCurve pretrain(WorldModel& model, const std::vector<TransitionSample>& data,
                   const TrainConfig& cfg) {
    if (data.empty()) fail(Err::InvalidConfig, "pretrain: empty dataset");
    if (cfg.batch_size < 1 || cfg.steps_per_epoch < 1)
        fail(Err::InvalidConfig, "pretrain: sizes must be positive");

    std::set<CompositionClass> all_classes(cfg.schedule.order.begin(), cfg.schedule.order.end());

    Rng root(cfg.seed ^ 0x9c0ffee1234ull);
    Rng pick_rng = root.fork("pick");
    Rng task_rng = root.fork("task");

    LossCurve curve;
    const int total = cfg.total_steps();
    for (int step = 0; step < total; ++step) {
        const int epoch = step / cfg.steps_per_epoch + 1;
        const auto allowed =
            cfg.curriculum ? allowed_classes(cfg.schedule, epoch) : all_classes;

        VarCache cache;
        std::vector<Var> objective_terms;
        std::map<CompositionClass, std::vector<Var>> per_class;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const TransitionSample& s =
                data[static_cast<size_t>(pick_rng.uniform_int(static_cast<int>(data.size())))];
            const TaskSpec task = sample_task(s, allowed, task_rng);
            TokenStream stream = frame_input(restrict_state(s.before, task.inputs), s.action, {},
                                             task.outputs, model.cfg.k_sig);
            Var u = item_losses(model, cache, stream, s.after, cfg.loss,
                                cfg.render_loss_weight, objective_terms);
            per_class[task.klass].push_back(u);
        }
        Var objective = ag::mean_scalars(objective_terms);
        check_finite(objective->val.a[0], step, epoch);
        ag::backward(objective);
        AdamConfig adam = cfg.adam;
        adam.lr = cfg.lr_at(step);
        adam_step(cache, adam);

        for (const auto& [klass, losses] : per_class) {
            KahanSum sum;
            for (const auto& l : losses) sum.add(l->val.a[0]);
            curve.points.push_back(
                CurvePoint{step, epoch, klass, sum.sum / static_cast<double>(losses.size())});
        }
    }
    return curve;
}

LossCurve cognitive_tune(WorldModel& model, const std::vector<TransitionSample>& tune_data,
                         const std::vector<Episode>& episodes,
                         const std::map<std::string, KnowledgeBase>& kbs, const TuneConfig& cfg) {
    if (tune_data.empty() && episodes.empty())
        fail(Err::InvalidConfig, "cognitive_tune: no tuning data");
    for (const auto& [scen, kb] : kbs)
        if (kb.entries.empty()) fail(Err::EmptyKnowledgeBase, "empty knowledge base: " + scen);

    // The 4.2 regime: everything frozen except the reflector.
    model.set_freeze("all", true);
    model.set_freeze("reflector", false);

    // Episodes usable for memory-augmented samples need at least
    // history_min + 1 transitions.
    std::vector<const Episode*> usable;
    for (const auto& ep : episodes)
        if (static_cast<int>(ep.samples.size()) >= cfg.history_min + 1) usable.push_back(&ep);

    Rng root(cfg.seed ^ 0x7a5eed42ULL);
    Rng pick_rng = root.fork("pick");
    Rng mode_rng = root.fork("mode");

    LossCurve curve;
    for (int step = 0; step < cfg.steps; ++step) {
        const bool memory_step =
            !usable.empty() && (tune_data.empty() || mode_rng.uniform() < cfg.memory_fraction);

        VarCache cache;
        std::vector<Var> objective_terms;
        std::map<CompositionClass, std::vector<Var>> per_class;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (memory_step) {
                const Episode& ep =
                    *usable[static_cast<size_t>(pick_rng.uniform_int(static_cast<int>(usable.size())))];
                const int n_trans = static_cast<int>(ep.samples.size());
                const int h = cfg.history_min +
                              pick_rng.uniform_int(cfg.history_max - cfg.history_min + 1);
                const int hist = std::min(h, n_trans - 1);
                const int t = hist + pick_rng.uniform_int(n_trans - hist);
                const TransitionSample& s = ep.samples[static_cast<size_t>(t)];
                const Vec cond = encode_condition(s.before, s.action);
                std::vector<Var> blocks;
                std::vector<ContextTokens> placeholders;
                for (int i = t - hist; i < t; ++i) {
                    MemoryEntry entry;
                    entry.step_index = ep.samples[static_cast<size_t>(i)].step_index;
                    entry.state = ep.samples[static_cast<size_t>(i)].before;
                    entry.action = ep.samples[static_cast<size_t>(i)].action;
                    entry.ground_truth = ep.samples[static_cast<size_t>(i)].after;
                    blocks.push_back(
                        reflect_var(model.reflector, cache, encode_context(model.lift, entry), cond));
                    placeholders.push_back(ContextTokens{Mat(model.rcfg.n_queries, model.cfg.d_model)});
                }
                std::set<Modality> outputs;
                for (const auto& [m, e] : s.after.modalities) outputs.insert(m);
                TokenStream stream =
                    frame_input(s.before, s.action, placeholders, outputs, model.cfg.k_sig);
                Var u = item_losses(model, cache, stream, s.after, cfg.loss, 0.0,
                                    objective_terms, &blocks);
                std::set<Modality> inputs;
                for (const auto& [m, e] : s.before.modalities) inputs.insert(m);
                per_class[classify_composition(inputs, outputs)].push_back(u);
            } else {
                const TransitionSample& s = tune_data[static_cast<size_t>(
                    pick_rng.uniform_int(static_cast<int>(tune_data.size())))];
                auto kb_it = kbs.find(s.scenario);
                if (kb_it == kbs.end())
                    fail(Err::EmptyKnowledgeBase, "no knowledge base for scenario " + s.scenario);
                const auto hits = kb_retrieve(kb_it->second, s.before, s.action, cfg.retrieval_k);
                const Vec cond = encode_condition(s.before, s.action);
                std::vector<Var> blocks;
                std::vector<ContextTokens> placeholders;
                for (const auto& hit : hits) {
                    blocks.push_back(reflect_var(model.reflector, cache,
                                                 encode_context(model.lift, *hit.sample), cond));
                    placeholders.push_back(ContextTokens{Mat(model.rcfg.n_queries, model.cfg.d_model)});
                }
                std::set<Modality> outputs;
                for (const auto& [m, e] : s.after.modalities) outputs.insert(m);
                TokenStream stream =
                    frame_input(s.before, s.action, placeholders, outputs, model.cfg.k_sig);
                Var u = item_losses(model, cache, stream, s.after, cfg.loss, 0.0,
                                    objective_terms, &blocks);
                std::set<Modality> inputs;
                for (const auto& [m, e] : s.before.modalities) inputs.insert(m);
                per_class[classify_composition(inputs, outputs)].push_back(u);
            }
        }
        Var objective = ag::mean_scalars(objective_terms);
        check_finite(objective->val.a[0], step, 1);
        ag::backward(objective);
        AdamConfig adam = cfg.adam;
        adam.lr = cfg.lr_at(step);
        adam_step(cache, adam);

        for (const auto& [klass, losses] : per_class) {
            KahanSum sum;
            for (const auto& l : losses) sum.add(l->val.a[0]);
            curve.points.push_back(
                CurvePoint{step, 1, klass, sum.sum / static_cast<double>(losses.size())});
        }
    }
    return curve;
}

// ------------------------------------------------------- gradient checks

double grad_rel_err(double analytic, double fd) {
    const double denom = std::max({std::fabs(analytic), std::fabs(fd), 1e-2});
    return std::fabs(analytic - fd) / denom;
}

GradCheckReport grad_check_compare(const std::map<std::string, Mat>& analytic,
                                   const std::map<std::string, Mat>& fd) {
    GradCheckReport report;
    for (const auto& [name, ga] : analytic) {
        const Mat& gf = fd.at(name);
        for (size_t i = 0; i < ga.a.size(); ++i) {
            const double rel = grad_rel_err(ga.a[i], gf.a[i]);
            ++report.entries_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst =
                    GradCheckEntry{name, static_cast<int>(i), ga.a[i], gf.a[i], rel};
            }
        }
    }
    return report;
}

namespace {

struct ProbeItem {
    TokenStream stream;
    std::vector<Mat> raw_ctx;
    Vec condition;
    WorldState target;
};

std::vector<ProbeItem> build_probe_items(WorldModel& model,
                                         const std::vector<TransitionSample>& probe) {
    std::vector<ProbeItem> items;
    for (size_t i = 0; i < probe.size(); ++i) {
        const TransitionSample& s = probe[i];
        ProbeItem item;
        item.condition = encode_condition(s.before, s.action);
        // Use the neighbouring probe sample as retrieved context.
        const TransitionSample& ctx_sample = probe[(i + 1) % probe.size()];
        item.raw_ctx.push_back(encode_context(model.lift, ctx_sample));
        std::vector<ContextTokens> placeholders(
            1, ContextTokens{Mat(model.rcfg.n_queries, model.cfg.d_model)});
        std::set<Modality> outputs;
        for (const auto& [m, e] : s.after.modalities) outputs.insert(m);
        item.stream = frame_input(s.before, s.action, placeholders, outputs, model.cfg.k_sig);
        item.target = s.after;
        items.push_back(std::move(item));
    }
    return items;
}

Var probe_loss(WorldModel& model, VarCache& cache, const std::vector<ProbeItem>& items) {
    std::vector<Var> objective_terms;
    for (const auto& item : items) {
        std::vector<Var> blocks;
        for (const auto& ctx : item.raw_ctx)
            blocks.push_back(reflect_var(model.reflector, cache, ctx, item.condition));
        item_losses(model, cache, item.stream, item.target, LossKind::one_minus_cosine, 1.0,
                    objective_terms, &blocks);
    }
    return ag::mean_scalars(objective_terms);
}

}  // namespace

GradCheckReport grad_check(WorldModel& model, const std::vector<TransitionSample>& probe,
                           const std::vector<std::string>& components, double h) {
    const auto items = build_probe_items(model, probe);
    const std::set<std::string> wanted(components.begin(), components.end());

    // Analytic pass.
    VarCache cache;
    Var loss = probe_loss(model, cache, items);
    ag::backward(loss);

    std::map<std::string, Mat> analytic;
    std::vector<Tensor*> targets;
    GradCheckReport skipped_only;
    model.for_each_tensor([&](Tensor& t) {
        if (!wanted.count(t.component)) return;
        if (t.frozen) {
            skipped_only.skipped_frozen.push_back(t.name);
            return;
        }
        targets.push_back(&t);
        auto it = cache.vars.find(&t);
        analytic[t.name] =
            (it != cache.vars.end() && it->second->grad.rows != 0)
                ? it->second->grad
                : Mat(t.value.rows, t.value.cols);
    });

    // Finite-difference pass.
    auto eval = [&]() {
        VarCache c2;
        c2.inference = true;
        return probe_loss(model, c2, items)->val.a[0];
    };
    std::map<std::string, Mat> fd;
    for (Tensor* t : targets) {
        Mat g(t->value.rows, t->value.cols);
        for (size_t i = 0; i < t->value.a.size(); ++i) {
            const double orig = t->value.a[i];
            t->value.a[i] = orig + h;
            const double lp = eval();
            t->value.a[i] = orig - h;
            const double lm = eval();
            t->value.a[i] = orig;
            g.a[i] = (lp - lm) / (2.0 * h);
        }
        fd[t->name] = std::move(g);
    }

    GradCheckReport report = grad_check_compare(analytic, fd);
    report.skipped_frozen = std::move(skipped_only.skipped_frozen);
    return report;
}

}  // namespace wk
