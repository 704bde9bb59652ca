#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace kamtori {

struct CriterionResult {
  std::string id;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::size_t threads = 0;
  // Ids to run; empty runs everything.
  std::vector<std::string> only;
};

std::vector<std::string> acceptance_ids();

// Runs the criteria in a fixed order. on_result fires as each one finishes.
std::vector<CriterionResult> run_acceptance(
    const AcceptanceOptions& options,
    const std::function<void(const CriterionResult&)>& on_result = {});

// "PASS <id>: <detail> [<seconds> s]"
std::string format_result(const CriterionResult& r);

}  // namespace kamtori
