#pragma once

// Invariant suite run by `lrals verify`: geometry identities, structure of the
// linearized ALS map, closed-form rates, solver consistency and determinism,
// all on small seeded instances.

#include <cstdint>
#include <string>
#include <vector>

namespace lrals {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity
  double tolerance = 0.0;  // bound it was compared against
  std::string detail;
};

std::vector<CheckResult> run_invariant_suite(std::uint64_t seed = 1);

}  // namespace lrals
