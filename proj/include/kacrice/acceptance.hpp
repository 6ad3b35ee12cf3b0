#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace kacrice {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool passed = false;
    double seconds = 0.0;
    double time_limit = 0.0;
    nlohmann::json details;
    nlohmann::json to_json() const;
};

struct AcceptanceOptions {
    std::uint64_t seed = 20240917;
    int threads = 1;
    /// criteria to run; empty runs 1..9
    std::vector<int> only;
};

/// Runs the acceptance criteria in order. A criterion passes only if its numerical checks pass and
/// it finishes within its time limit. Exceptions inside a criterion are reported as failures.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_done = {});

/// "PASS  [3] index partition (12.3 s / 600 s)" style line.
std::string format_line(const CriterionResult& r);

}  // namespace kacrice
