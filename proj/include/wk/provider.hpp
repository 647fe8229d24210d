#pragma once

#include <memory>
#include <string>
#include <vector>

#include "wk/common.hpp"
#include "wk/rng.hpp"

namespace wk {

struct ProviderRequest {
    std::string prompt;
    int max_tokens = 256;
    double temperature = 0.7;
};

// Text-completion backend for the instruction synthesis pipeline. Every
// call is logged with a request hash; the mock is pure given its seed so
// whole pipelines replay byte-for-byte.
class ProviderClient {
public:
    virtual ~ProviderClient() = default;
    virtual std::string complete(const ProviderRequest& req) = 0;
    virtual std::string name() const = 0;
};

struct AuditEntry {
    int64_t logical_time = 0;
    uint64_t request_hash = 0;
    std::string provider;
    bool ok = false;
    int attempt = 0;
    std::string detail;
};

class AuditLog {
public:
    explicit AuditLog(std::string path = "") : path_(std::move(path)) {}
    void record(AuditEntry entry);
    const std::vector<AuditEntry>& entries() const { return entries_; }
    int64_t tick() { return next_time_++; }

private:
    std::string path_;
    std::vector<AuditEntry> entries_;
    int64_t next_time_ = 0;
};

// Deterministic template-grammar provider. Proposal prompts yield
// instruction sentences built from a fixed word list plus the configured
// action phrases; extraction prompts parse the embedded instruction with a
// rule set and return plan JSON.
class MockProvider final : public ProviderClient {
public:
    MockProvider(uint64_t seed, std::vector<std::string> action_phrases,
                 int max_actions_per_plan = 3);
    std::string complete(const ProviderRequest& req) override;
    std::string name() const override { return "mock"; }

private:
    Rng rng_;
    std::vector<std::string> actions_;
    int max_actions_;
};

struct HttpProviderConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string path = "/v1/complete";
    std::string api_key_env = "WORLDKIT_PROVIDER_KEY";
    int max_retries = 3;
    int timeout_seconds = 10;
};

// POSTs {"prompt","max_tokens","temperature"} and expects {"text": ...}.
// Retries with the configured budget, then throws ProviderError carrying
// the request hash.
class HttpProvider final : public ProviderClient {
public:
    HttpProvider(HttpProviderConfig cfg, AuditLog* audit);
    std::string complete(const ProviderRequest& req) override;
    std::string name() const override { return "http"; }

private:
    HttpProviderConfig cfg_;
    AuditLog* audit_;
};

uint64_t request_hash(const ProviderRequest& req);

}  // namespace wk
