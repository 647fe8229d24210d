#include "wk/model.hpp"

#include <json.hpp>

#include "wk/dataset_io.hpp"

namespace wk {

using nlohmann::json;

WorldModel WorldModel::init(const ModelConfig& cfg, const ReflectorConfig& rcfg) {
    WorldModel m;
    m.cfg = cfg;
    m.rcfg = rcfg;
    m.backbone = Backbone::init(cfg);
    Rng head_rng(cfg.seed ^ 0x4ead5eed77ull);
    for (Modality mod : kStateModalities)
        for (Space sp : {Space::unified, Space::render})
            m.heads.push_back(SignalHead::init(mod, sp, cfg, head_rng));
    m.reflector = Reflector::init(rcfg, cfg.d_model, 2 * cfg.d_enc, cfg.seed);
    m.lift = ContextLift::init(cfg.d_enc, cfg.d_model, cfg.seed);
    Rng render_rng(cfg.seed ^ 0x7e2de77a95ull);
    for (Modality mod : kStateModalities) {
        Mat R = Mat::randn(cfg.d_enc, cfg.d_enc, 1.0 / std::sqrt(cfg.d_enc), render_rng);
        Vec r(cfg.d_enc);
        for (auto& x : r) x = 0.1 * render_rng.normal();
        m.render_maps[mod] = {std::move(R), std::move(r)};
    }
    return m;
}

SignalHead& WorldModel::head(Modality m, Space s) {
    for (auto& h : heads)
        if (h.modality == m && h.space == s) return h;
    fail(Err::UnknownModality, "no signal head for modality");
}

void WorldModel::for_each_tensor(const std::function<void(Tensor&)>& fn) {
    backbone.for_each_tensor(fn);
    for (auto& h : heads) h.for_each_tensor(fn);
    reflector.for_each_tensor(fn);
}

void WorldModel::for_each_tensor(const std::function<void(const Tensor&)>& fn) const {
    const_cast<WorldModel*>(this)->for_each_tensor(
        [&fn](Tensor& t) { fn(static_cast<const Tensor&>(t)); });
}

void WorldModel::set_freeze(const std::string& component, bool frozen) {
    bool matched = false;
    for_each_tensor([&](Tensor& t) {
        const bool hit = component == "all" || t.component == component ||
                         (component == "heads" && (t.component == "heads_unified" ||
                                                   t.component == "heads_render"));
        if (hit) {
            t.frozen = frozen;
            matched = true;
        }
    });
    if (!matched) fail(Err::UnknownComponent, "set_freeze: unknown component " + component);
}

uint64_t WorldModel::component_checksum(const std::string& component) const {
    uint64_t h = kFnvOffset;
    bool matched = false;
    for_each_tensor([&](const Tensor& t) {
        if (t.component != component) return;
        matched = true;
        h = fnv1a(t.name, h);
        h = mat_checksum(t.value, h);
    });
    if (component == "fixed") {
        matched = true;
        h = mat_checksum(lift.W, h);
        h = fnv1a_doubles(lift.b.data(), lift.b.size(), h);
        h = mat_checksum(lift.role_emb, h);
        for (const auto& [m, rr] : render_maps) {
            h = mat_checksum(rr.first, h);
            h = fnv1a_doubles(rr.second.data(), rr.second.size(), h);
        }
    }
    if (!matched) fail(Err::UnknownComponent, "checksum: unknown component " + component);
    return h;
}

std::map<std::string, uint64_t> WorldModel::all_checksums() const {
    std::map<std::string, uint64_t> out;
    for (const char* comp : {"base", "adapters", "heads_unified", "heads_render", "reflector", "fixed"})
        out[comp] = component_checksum(comp);
    return out;
}

Vec WorldModel::render_target(Modality m, const Vec& unified) const {
    auto it = render_maps.find(m);
    if (it == render_maps.end()) fail(Err::UnknownModality, "render_target: unknown modality");
    const Mat& R = it->second.first;
    const Vec& r = it->second.second;
    Vec out(r);
    for (int i = 0; i < R.rows; ++i) {
        double s = r[i];
        const double* row = R.row(i);
        for (int j = 0; j < R.cols; ++j) s += row[j] * unified[j];
        out[i] = s;
    }
    return out;
}

namespace {

json mat_json(const Mat& m) {
    json j;
    j["rows"] = m.rows;
    j["cols"] = m.cols;
    j["data"] = m.a;
    return j;
}

Mat mat_from_json(const json& j) {
    Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
    m.a = j.at("data").get<Vec>();
    if (m.a.size() != static_cast<size_t>(m.rows) * m.cols)
        fail(Err::DataError, "checkpoint tensor size mismatch");
    return m;
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const WorldModel& model, const std::string& path,
                     const std::array<uint64_t, 4>* rng_state) {
    json j;
    j["version"] = kCheckpointVersion;
    json cfg;
    cfg["d_model"] = model.cfg.d_model;
    cfg["n_layers"] = model.cfg.n_layers;
    cfg["n_heads"] = model.cfg.n_heads;
    cfg["k_sig"] = model.cfg.k_sig;
    cfg["d_enc"] = model.cfg.d_enc;
    cfg["d_ff"] = model.cfg.d_ff;
    cfg["max_seq_len"] = model.cfg.max_seq_len;
    cfg["adapter_rank"] = model.cfg.adapter_rank;
    cfg["adapter_alpha"] = model.cfg.adapter_alpha;
    cfg["adapter_targets"] = model.cfg.adapter_targets;
    cfg["seed"] = model.cfg.seed;
    j["config"] = cfg;
    json rcfg;
    rcfg["n_queries"] = model.rcfg.n_queries;
    rcfg["n_layers"] = model.rcfg.n_layers;
    rcfg["n_heads"] = model.rcfg.n_heads;
    rcfg["d_q"] = model.rcfg.d_q;
    rcfg["d_ff"] = model.rcfg.d_ff;
    j["reflector_config"] = rcfg;

    json tensors = json::object();
    model.for_each_tensor([&](const Tensor& t) {
        json tj = mat_json(t.value);
        tj["component"] = t.component;
        tj["frozen"] = t.frozen;
        tensors[t.name] = tj;
    });
    j["tensors"] = tensors;

    json fixed;
    fixed["lift_W"] = mat_json(model.lift.W);
    fixed["lift_b"] = model.lift.b;
    fixed["role_emb"] = mat_json(model.lift.role_emb);
    json render = json::object();
    for (const auto& [m, rr] : model.render_maps) {
        json o;
        o["R"] = mat_json(rr.first);
        o["r"] = rr.second;
        render[modality_name(m)] = o;
    }
    fixed["render"] = render;
    j["fixed"] = fixed;

    json sums = json::object();
    for (const auto& [comp, sum] : model.all_checksums()) sums[comp] = hex64(sum);
    j["checksums"] = sums;

    if (rng_state) j["rng_state"] = *rng_state;

    atomic_write(path, j.dump() + "\n");
}

WorldModel load_checkpoint(const std::string& path, std::array<uint64_t, 4>* rng_state) {
    json j = json::parse(read_file(path));
    if (j.at("version").get<int>() != kCheckpointVersion)
        fail(Err::DataError, "unsupported checkpoint version");
    ModelConfig cfg;
    const json& cj = j.at("config");
    cfg.d_model = cj.at("d_model").get<int>();
    cfg.n_layers = cj.at("n_layers").get<int>();
    cfg.n_heads = cj.at("n_heads").get<int>();
    cfg.k_sig = cj.at("k_sig").get<int>();
    cfg.d_enc = cj.at("d_enc").get<int>();
    cfg.d_ff = cj.at("d_ff").get<int>();
    cfg.max_seq_len = cj.at("max_seq_len").get<int>();
    cfg.adapter_rank = cj.at("adapter_rank").get<int>();
    cfg.adapter_alpha = cj.at("adapter_alpha").get<double>();
    cfg.adapter_targets = cj.at("adapter_targets").get<std::string>();
    cfg.seed = cj.at("seed").get<uint64_t>();
    ReflectorConfig rcfg;
    const json& rj = j.at("reflector_config");
    rcfg.n_queries = rj.at("n_queries").get<int>();
    rcfg.n_layers = rj.at("n_layers").get<int>();
    rcfg.n_heads = rj.at("n_heads").get<int>();
    rcfg.d_q = rj.at("d_q").get<int>();
    rcfg.d_ff = rj.at("d_ff").get<int>();

    WorldModel model = WorldModel::init(cfg, rcfg);
    const json& tensors = j.at("tensors");
    model.for_each_tensor([&](Tensor& t) {
        if (!tensors.contains(t.name)) fail(Err::DataError, "checkpoint missing tensor " + t.name);
        const json& tj = tensors.at(t.name);
        t.value = mat_from_json(tj);
        t.frozen = tj.at("frozen").get<bool>();
        t.adam_m = Mat(t.value.rows, t.value.cols);
        t.adam_v = Mat(t.value.rows, t.value.cols);
        t.adam_t = 0;
    });
    const json& fixed = j.at("fixed");
    model.lift.W = mat_from_json(fixed.at("lift_W"));
    model.lift.b = fixed.at("lift_b").get<Vec>();
    model.lift.role_emb = mat_from_json(fixed.at("role_emb"));
    model.render_maps.clear();
    for (auto it = fixed.at("render").begin(); it != fixed.at("render").end(); ++it) {
        model.render_maps[modality_from_name(it.key())] = {
            mat_from_json(it.value().at("R")), it.value().at("r").get<Vec>()};
    }

    // Verify integrity against the stored component checksums.
    for (const auto& [comp, sum] : model.all_checksums()) {
        const std::string stored = j.at("checksums").at(comp).get<std::string>();
        if (stored != hex64(sum))
            fail(Err::DataError, "checkpoint checksum mismatch for component " + comp);
    }

    if (rng_state && j.contains("rng_state")) *rng_state = j.at("rng_state").get<std::array<uint64_t, 4>>();
    return model;
}

std::map<Modality, Vec> model_predict(WorldModel& model, const TokenStream& stream, Space space) {
    VarCache cache;
    cache.inference = true;
    auto hiddens = predict_transition(model.backbone, cache, stream);
    std::map<Modality, Vec> out;
    for (auto& [m, hv] : hiddens)
        out[m] = head_forward(model.head(m, space), cache, hv)->val.a;
    return out;
}

}  // namespace wk
