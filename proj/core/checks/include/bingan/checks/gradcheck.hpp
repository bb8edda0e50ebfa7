#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bingan/tensor.hpp"

namespace bingan::checks {

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-4). Below the floor
/// this is an absolute error scaled by 1e4, which keeps finite-difference
/// round-off on near-zero gradients from dominating.
double relative_error(double analytic, double numeric);

using InputMaker = std::function<std::vector<Tensor>(std::mt19937_64&)>;
using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckResult {
  std::string name;
  std::size_t points = 0;
  double max_rel_err = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares backward() against central differences at `min_points` random
/// coordinates of the inputs that require grad, drawing fresh inputs as
/// often as needed.
GradCheckResult check_gradient(const std::string& name, const InputMaker& make, const ScalarFn& fn,
                               std::mt19937_64& rng, std::size_t min_points = 100, double h = 1e-5);

}  // namespace bingan::checks
