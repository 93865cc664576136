#pragma once

// Self-check suites for the library's invariants, run by `hgd verify`.

#include <ostream>
#include <string>
#include <vector>

namespace hgd {

enum class VerifyLevel { Quick, Full };

struct VerifyOptions {
  VerifyLevel level = VerifyLevel::Quick;
  // Mutation test: swaps in a deliberately wrong pseudoinverse.
  bool inject_pinv_fault = false;
  // Print per-check wall time (off so the table is reproducible).
  bool timing = false;
};

struct CheckResult {
  std::string module;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<CheckResult> run_verify(const VerifyOptions& opts);

// Prints the pass/fail table; returns 0 iff every check passed.
int cmd_verify(const VerifyOptions& opts, std::ostream& out);

}  // namespace hgd
