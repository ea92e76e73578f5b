#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "formation/scenario.hpp"

namespace formation::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,       // bad flags, unreadable files, estimator did not converge
  kValidation = 2,    // scenario, state or trajectory document rejected
  kStall = 3,         // descent line search exhausted
  kJacobian = 4,      // analytic and numeric Jacobians disagree
  kMonteCarlo = 5,    // too many failed trials at some checkpoint
  kUnobservable = 6,  // rank-deficient FIM or coincident tags
};

/// `preset:NAME` or a path to a scenario document.
Scenario resolve_scenario(const std::string& source);

/// --threads if given, else FORMATION_OPT_THREADS, else hardware concurrency.
unsigned resolve_threads(std::optional<unsigned> flag);

/// Runs one command line; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace formation::cli
