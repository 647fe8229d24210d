#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wk {

using Vec = std::vector<double>;

// Every failure mode surfaced by the library. The CLI maps these onto
// process exit codes (see tools/).
enum class Err {
    ZeroVector,
    DimensionMismatch,
    UnknownAction,
    UnknownModality,
    InvalidConfig,
    IoError,
    EmptyRequest,
    MalformedStream,
    UnknownComponent,
    EmptyKnowledgeBase,
    NonMonotonicStep,
    UnknownEpisode,
    EmptySet,
    EpochOutOfRange,
    NoRealizableTask,
    NonFiniteLoss,
    ProviderError,
    UnparseablePlan,
    EmptyPool,
    DisjointnessViolation,
    EpisodeTooShort,
    ConfigError,
    DataError,
};

struct Error : std::runtime_error {
    Err kind;
    Error(Err k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

[[noreturn]] inline void fail(Err k, const std::string& msg) { throw Error(k, msg); }

inline const char* err_name(Err k) {
    switch (k) {
        case Err::ZeroVector: return "ZeroVector";
        case Err::DimensionMismatch: return "DimensionMismatch";
        case Err::UnknownAction: return "UnknownAction";
        case Err::UnknownModality: return "UnknownModality";
        case Err::InvalidConfig: return "InvalidConfig";
        case Err::IoError: return "IoError";
        case Err::EmptyRequest: return "EmptyRequest";
        case Err::MalformedStream: return "MalformedStream";
        case Err::UnknownComponent: return "UnknownComponent";
        case Err::EmptyKnowledgeBase: return "EmptyKnowledgeBase";
        case Err::NonMonotonicStep: return "NonMonotonicStep";
        case Err::UnknownEpisode: return "UnknownEpisode";
        case Err::EmptySet: return "EmptySet";
        case Err::EpochOutOfRange: return "EpochOutOfRange";
        case Err::NoRealizableTask: return "NoRealizableTask";
        case Err::NonFiniteLoss: return "NonFiniteLoss";
        case Err::ProviderError: return "ProviderError";
        case Err::UnparseablePlan: return "UnparseablePlan";
        case Err::EmptyPool: return "EmptyPool";
        case Err::DisjointnessViolation: return "DisjointnessViolation";
        case Err::EpisodeTooShort: return "EpisodeTooShort";
        case Err::ConfigError: return "ConfigError";
        case Err::DataError: return "DataError";
    }
    return "Unknown";
}

// ---------------------------------------------------------------- hashing

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

inline uint64_t fnv1a(std::string_view s, uint64_t h = kFnvOffset) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a_u64(uint64_t v, uint64_t h = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a_doubles(const double* p, size_t n, uint64_t h = kFnvOffset) {
    for (size_t i = 0; i < n; ++i) {
        h = fnv1a_u64(std::bit_cast<uint64_t>(p[i]), h);
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

// --------------------------------------------------------- float printing

// 17 significant digits: enough to round-trip any IEEE double exactly.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

// ------------------------------------------------------- Kahan summation

struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double v) {
        double y = v - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

}  // namespace wk
