#include "wk/provider.hpp"

#include <json.hpp>

#include <httplib.h>

#include <cstdlib>

#include "wk/dataset_io.hpp"

namespace wk {

using nlohmann::json;

uint64_t request_hash(const ProviderRequest& req) {
    uint64_t h = fnv1a(req.prompt);
    h = fnv1a_u64(static_cast<uint64_t>(req.max_tokens), h);
    h = fnv1a_u64(std::bit_cast<uint64_t>(req.temperature), h);
    return h;
}

void AuditLog::record(AuditEntry entry) {
    entry.logical_time = tick();
    entries_.push_back(entry);
    if (path_.empty()) return;
    std::string body;
    for (const auto& e : entries_) {
        json line;
        line["t"] = e.logical_time;
        line["request_hash"] = hex64(e.request_hash);
        line["provider"] = e.provider;
        line["ok"] = e.ok;
        line["attempt"] = e.attempt;
        line["detail"] = e.detail;
        body += line.dump() + "\n";
    }
    atomic_write(path_, body);
}

namespace {

const std::vector<std::string> kMockPlaces = {"kitchen", "workshop", "garden",
                                              "cellar",  "bench",    "counter"};
const std::vector<std::string> kMockAdjectives = {"copper", "wooden", "dusty",
                                                  "bright", "narrow", "worn"};
const std::vector<std::string> kMockNouns = {"pan", "bowl", "crate", "kettle", "rope", "tray"};

std::string pick(const std::vector<std::string>& pool, Rng& rng) {
    return pool[static_cast<size_t>(rng.uniform_int(static_cast<int>(pool.size())))];
}

}  // namespace

MockProvider::MockProvider(uint64_t seed, std::vector<std::string> action_phrases,
                           int max_actions_per_plan)
    : rng_(seed ^ 0x30c4a11edull), actions_(std::move(action_phrases)),
      max_actions_(max_actions_per_plan) {}

std::string MockProvider::complete(const ProviderRequest& req) {
    if (req.prompt.find("TASK: propose") != std::string::npos) {
        std::string out = "Begin at the " + pick(kMockPlaces, rng_) + " with the " +
                          pick(kMockAdjectives, rng_) + " " + pick(kMockNouns, rng_) + ".";
        // Mostly transition-style instructions; some bare descriptions.
        if (!actions_.empty() && rng_.uniform() > 0.2) {
            const int n = 1 + rng_.uniform_int(max_actions_);
            for (int i = 0; i < n; ++i) {
                out += (i + 1 == n && n > 1) ? " Finally " : " Then ";
                out += pick(actions_, rng_);
                out += ".";
            }
        }
        return out;
    }
    if (req.prompt.find("TASK: extract") != std::string::npos) {
        const auto pos = req.prompt.find("INSTRUCTION:");
        if (pos == std::string::npos) return "{}";
        std::string text = req.prompt.substr(pos + 12);
        while (!text.empty() && (text.front() == ' ' || text.front() == '\n')) text.erase(0, 1);
        // Rule set: the first sentence describes the initial state; sentences
        // led by "Then"/"Finally" are actions.
        std::vector<std::string> sentences;
        std::string cur;
        for (char c : text) {
            if (c == '.') {
                if (!cur.empty()) sentences.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) sentences.push_back(cur);
        json j;
        json acts = json::array();
        std::string initial;
        for (auto& s : sentences) {
            while (!s.empty() && s.front() == ' ') s.erase(0, 1);
            if (s.rfind("Then ", 0) == 0)
                acts.push_back(s.substr(5));
            else if (s.rfind("Finally ", 0) == 0)
                acts.push_back(s.substr(8));
            else if (initial.empty())
                initial = s;
        }
        j["pattern"] = acts.empty() ? "description_conditioned" : "transition_conditioned";
        j["initial_state"] = initial;
        j["actions"] = acts;
        j["modalities"] = {"image", "video", "audio"};
        return j.dump();
    }
    return "unsupported prompt";
}

HttpProvider::HttpProvider(HttpProviderConfig cfg, AuditLog* audit)
    : cfg_(std::move(cfg)), audit_(audit) {}

std::string HttpProvider::complete(const ProviderRequest& req) {
    const uint64_t hash = request_hash(req);
    json body;
    body["prompt"] = req.prompt;
    body["max_tokens"] = req.max_tokens;
    body["temperature"] = req.temperature;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.max_retries; ++attempt) {
        httplib::Client client(cfg_.host, cfg_.port);
        client.set_connection_timeout(cfg_.timeout_seconds);
        client.set_read_timeout(cfg_.timeout_seconds);
        httplib::Headers headers;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + key);
        auto res = client.Post(cfg_.path, headers, payload, "application/json");
        if (res && res->status == 200) {
            try {
                json j = json::parse(res->body);
                const std::string text = j.at("text").get<std::string>();
                if (audit_) audit_->record(AuditEntry{0, hash, name(), true, attempt, "ok"});
                return text;
            } catch (const std::exception& e) {
                last_error = std::string("bad response body: ") + e.what();
            }
        } else {
            last_error = res ? "status " + std::to_string(res->status)
                             : "transport error " + httplib::to_string(res.error());
        }
        if (audit_) audit_->record(AuditEntry{0, hash, name(), false, attempt, last_error});
    }
    fail(Err::ProviderError, "provider failed after " + std::to_string(cfg_.max_retries) +
                                 " attempts (request " + hex64(hash) + "): " + last_error);
}

}  // namespace wk
