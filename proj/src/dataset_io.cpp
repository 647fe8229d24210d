#include "wk/dataset_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wk/synthworld.hpp"

namespace wk {

using nlohmann::json;

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(Err::IoError, "cannot open for write: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) fail(Err::IoError, "short write: " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) fail(Err::IoError, "rename failed: " + path + " (" + ec.message() + ")");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Err::IoError, "cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string vec_json(const Vec& v) {
    std::string out = "[";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt17(v[i]);
    }
    out += "]";
    return out;
}

static std::string state_json(const WorldState& s) {
    std::string out = "{";
    bool first = true;
    for (const auto& [m, e] : s.modalities) {
        if (!first) out += ",";
        first = false;
        out += "\"";
        out += modality_name(m);
        out += "\":";
        out += vec_json(e);
    }
    out += "}";
    return out;
}

static std::string escape_json(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

uint64_t write_dataset_jsonl(const std::string& path, const std::vector<Episode>& episodes) {
    std::string body;
    for (const auto& ep : episodes) {
        for (const auto& s : ep.samples) {
            body += "{\"episode_id\":" + std::to_string(s.episode_id);
            body += ",\"step_index\":" + std::to_string(s.step_index);
            body += ",\"scenario\":\"" + escape_json(s.scenario) + "\"";
            body += ",\"action_text\":\"" + escape_json(s.action.text) + "\"";
            body += ",\"modalities\":" + state_json(s.before);
            body += ",\"next_modalities\":" + state_json(s.after);
            body += "}\n";
        }
    }
    atomic_write(path, body);
    return fnv1a(body);
}

static WorldState state_from_json(const json& j) {
    WorldState st;
    for (auto it = j.begin(); it != j.end(); ++it) {
        Vec e = it.value().get<Vec>();
        st.modalities[modality_from_name(it.key())] = std::move(e);
    }
    return st;
}

std::vector<Episode> read_dataset_jsonl(const std::string& path, const WorldSpec& encoder_spec) {
    std::ifstream in(path);
    if (!in) fail(Err::IoError, "cannot open dataset: " + path);
    std::map<int64_t, Episode> by_id;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            fail(Err::DataError, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        TransitionSample s;
        s.episode_id = j.at("episode_id").get<int64_t>();
        s.step_index = j.at("step_index").get<int>();
        s.scenario = j.at("scenario").get<std::string>();
        const std::string action_text = j.at("action_text").get<std::string>();
        s.action = ActionDesc{action_text, embed_text(encoder_spec, action_text)};
        s.before = state_from_json(j.at("modalities"));
        s.after = state_from_json(j.at("next_modalities"));
        auto& ep = by_id[s.episode_id];
        ep.episode_id = s.episode_id;
        ep.scenario = s.scenario;
        ep.samples.push_back(std::move(s));
    }
    std::vector<Episode> out;
    for (auto& [id, ep] : by_id) {
        for (size_t i = 0; i < ep.samples.size(); ++i)
            if (ep.samples[i].step_index != static_cast<int>(i))
                fail(Err::DataError, "episode " + std::to_string(id) + ": step indices not 0..n-1");
        out.push_back(std::move(ep));
    }
    return out;
}

void write_sidecar_jsonl(const std::string& path,
                         const std::map<std::pair<int64_t, int>, SidecarEntry>& sidecar) {
    std::string body;
    for (const auto& [key, entry] : sidecar) {
        body += "{\"episode_id\":" + std::to_string(key.first);
        body += ",\"step_index\":" + std::to_string(key.second);
        body += ",\"z_before\":" + vec_json(entry.z_before);
        body += ",\"z_after\":" + vec_json(entry.z_after);
        body += "}\n";
    }
    atomic_write(path, body);
}

std::map<std::pair<int64_t, int>, SidecarEntry> read_sidecar_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Err::IoError, "cannot open sidecar: " + path);
    std::map<std::pair<int64_t, int>, SidecarEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        SidecarEntry e;
        e.z_before = j.at("z_before").get<Vec>();
        e.z_after = j.at("z_after").get<Vec>();
        out[{j.at("episode_id").get<int64_t>(), j.at("step_index").get<int>()}] = std::move(e);
    }
    return out;
}

void write_manifest_json(const std::string& path, const Manifest& man) {
    json j;
    j["world_seed"] = man.world_seed;
    j["data_seed"] = man.data_seed;
    j["n_episodes"] = man.n_episodes;
    j["episode_len"] = man.episode_len;
    j["n_samples"] = man.n_samples;
    j["per_scenario"] = man.per_scenario;
    j["menu_mode"] = man.menu_mode;
    j["esoteric_mode"] = man.esoteric_mode;
    j["dataset_hash"] = hex64(man.dataset_hash);
    atomic_write(path, j.dump(2) + "\n");
}

Manifest read_manifest_json(const std::string& path) {
    json j = json::parse(read_file(path));
    Manifest man;
    man.world_seed = j.at("world_seed").get<uint64_t>();
    man.data_seed = j.at("data_seed").get<uint64_t>();
    man.n_episodes = j.at("n_episodes").get<int>();
    man.episode_len = j.at("episode_len").get<int>();
    man.n_samples = j.at("n_samples").get<int>();
    man.per_scenario = j.at("per_scenario").get<std::map<std::string, int>>();
    man.menu_mode = j.at("menu_mode").get<std::string>();
    man.esoteric_mode = j.at("esoteric_mode").get<std::string>();
    man.dataset_hash = std::stoull(j.at("dataset_hash").get<std::string>(), nullptr, 16);
    return man;
}

static json mat_json(const Mat& m) {
    json j;
    j["rows"] = m.rows;
    j["cols"] = m.cols;
    j["data"] = m.a;
    return j;
}

static Mat mat_from_json(const json& j) {
    Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
    m.a = j.at("data").get<Vec>();
    return m;
}

void write_world_json(const std::string& path, const WorldSpec& spec) {
    json j;
    j["latent_dim"] = spec.latent_dim;
    j["d_enc"] = spec.d_enc;
    j["seed"] = spec.seed;
    j["vocab"] = spec.vocab;
    j["scenarios"] = spec.scenarios;
    j["text_encoder"] = mat_json(spec.text_encoder);
    json obs = json::object();
    for (const auto& [m, om] : spec.observations) {
        json o;
        o["M"] = mat_json(om.M);
        o["c"] = om.c;
        o["squash"] = (om.squash == Squash::tanh_) ? "tanh" : "identity";
        obs[modality_name(m)] = o;
    }
    j["observations"] = obs;
    json acts = json::array();
    for (const auto& a : spec.actions) {
        json o;
        o["name"] = a.name;
        o["A"] = mat_json(a.A);
        o["b"] = a.b;
        o["text"] = a.text;
        o["scenario"] = a.scenario;
        o["esoteric"] = a.esoteric;
        acts.push_back(o);
    }
    j["actions"] = acts;
    atomic_write(path, j.dump() + "\n");
}

WorldSpec read_world_json(const std::string& path) {
    json j = json::parse(read_file(path));
    WorldSpec spec;
    spec.latent_dim = j.at("latent_dim").get<int>();
    spec.d_enc = j.at("d_enc").get<int>();
    spec.seed = j.at("seed").get<uint64_t>();
    spec.vocab = j.at("vocab").get<std::vector<std::string>>();
    spec.scenarios = j.at("scenarios").get<std::vector<std::string>>();
    spec.text_encoder = mat_from_json(j.at("text_encoder"));
    for (auto it = j.at("observations").begin(); it != j.at("observations").end(); ++it) {
        ObservationMap om;
        om.M = mat_from_json(it.value().at("M"));
        om.c = it.value().at("c").get<Vec>();
        om.squash =
            (it.value().at("squash").get<std::string>() == "tanh") ? Squash::tanh_ : Squash::identity;
        spec.observations[modality_from_name(it.key())] = std::move(om);
    }
    for (const auto& o : j.at("actions")) {
        ActionSpec a;
        a.name = o.at("name").get<std::string>();
        a.A = mat_from_json(o.at("A"));
        a.b = o.at("b").get<Vec>();
        a.text = o.at("text").get<std::string>();
        a.scenario = o.at("scenario").get<std::string>();
        a.esoteric = o.at("esoteric").get<bool>();
        spec.actions.push_back(std::move(a));
    }
    return spec;
}

}  // namespace wk
