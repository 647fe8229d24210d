#pragma once

#include <string>
#include <vector>

namespace wk::accept {

// One structural/ordinal acceptance criterion, run at pinned seeds and
// tolerances. The suite prints one pass/fail line per criterion; `repro`
// drives the same runners end to end and writes summary.json.
struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

std::vector<int> criterion_ids();
CriterionResult run_criterion(int id, int threads);
std::vector<CriterionResult> run_all(int threads, const std::vector<int>& only = {});
std::string summary_json(const std::vector<CriterionResult>& results);

}  // namespace wk::accept
