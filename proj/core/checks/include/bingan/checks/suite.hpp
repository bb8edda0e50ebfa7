#pragma once

// Named check batteries used by the test suite and `bingan selfcheck`.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bingan/checks/gradcheck.hpp"

namespace bingan::checks {

struct GradCase {
  std::string name;
  InputMaker make;
  ScalarFn fn;
};

/// Every differentiable primitive plus each loss term and the weighted total.
std::vector<GradCase> gradient_cases();

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckLine> run_gradient_suite(std::uint64_t seed, std::size_t points = 100, double tol = 1e-4);

/// Library paths against the loop oracles: Hamming identity, pairwise
/// losses, AP / mAP and FPR at a target TPR.
std::vector<CheckLine> run_oracle_suite(std::uint64_t seed);

}  // namespace bingan::checks
