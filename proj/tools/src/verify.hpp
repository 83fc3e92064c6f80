#pragma once

#include <string>
#include <vector>

namespace torus::cli {

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyResult {
  std::string id;
  std::vector<VerifyCheck> checks;
  double seconds = 0.0;
  std::string error;  // set when the run threw before finishing

  bool passed() const;
};

/// Runs the closed-form checks for one catalog entry at default parameters.
VerifyResult verify(const std::string& id, double tol = 1e-10);

/// Runs `ids` (all entries when empty) on a thread pool sized by
/// TORUS_ASYMPTOTE_THREADS, falling back to the hardware concurrency. Results
/// keep the order of `ids`.
std::vector<VerifyResult> verify_all(std::vector<std::string> ids, double tol = 1e-10);

}  // namespace torus::cli
