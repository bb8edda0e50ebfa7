#include "bingan/checks/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bingan/errors.hpp"

namespace bingan::checks {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult check_gradient(const std::string& name, const InputMaker& make, const ScalarFn& fn,
                               std::mt19937_64& rng, std::size_t min_points, double h) {
  GradCheckResult result;
  result.name = name;
  for (int trial = 0; result.points < min_points; ++trial) {
    if (trial > 10000) throw ContractError("check_gradient(" + name + "): inputs have no differentiable entries");
    std::vector<Tensor> inputs = make(rng);
    for (auto& t : inputs) t.zero_grad();
    backward(fn(inputs));

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (!inputs[i].requires_grad()) continue;
      for (std::size_t j = 0; j < inputs[i].size(); ++j) coords.emplace_back(i, j);
    }
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::min(coords.size(), min_points - result.points));

    for (auto [i, j] : coords) {
      const double analytic = inputs[i].grad()[j];
      auto data = inputs[i].data();
      const double x = data[j];
      data[j] = x + h;
      const double up = fn(inputs).item();
      data[j] = x - h;
      const double down = fn(inputs).item();
      data[j] = x;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic, numeric);
      if (!(err <= result.max_rel_err)) {
        result.max_rel_err = std::isnan(err) ? INFINITY : err;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
      ++result.points;
    }
  }
  return result;
}

}  // namespace bingan::checks
