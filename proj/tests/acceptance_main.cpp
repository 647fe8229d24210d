// Acceptance suite: runs every pinned criterion and prints one pass/fail
// line each. Exit status is nonzero if any criterion fails.
//
// Usage: worldkit_acceptance [--only N[,N...]] [--threads N]

#include <cstdio>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

#include "wk/accept.hpp"

int main(int argc, char** argv) {
    std::vector<int> only;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 2;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            std::string arg = argv[++i];
            size_t pos = 0;
            while (pos < arg.size()) {
                size_t comma = arg.find(',', pos);
                if (comma == std::string::npos) comma = arg.size();
                only.push_back(std::stoi(arg.substr(pos, comma - pos)));
                pos = comma + 1;
            }
        } else if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc) {
            threads = std::stoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--only N[,N...]] [--threads N]\n", argv[0]);
            return 2;
        }
    }

    const auto results = wk::accept::run_all(threads, only);
    bool all = true;
    for (const auto& r : results) {
        std::printf("[%s] criterion-%d %s (%.1fs): %s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.seconds, r.detail.c_str());
        std::fflush(stdout);
        all = all && r.pass;
    }
    std::printf("%s: %zu criteria\n", all ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
                results.size());
    return all ? 0 : 1;
}
