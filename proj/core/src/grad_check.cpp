#include "speechrt/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "speechrt/errors.hpp"

namespace speechrt {

GradCheckReport grad_check(const LossFunction& loss, std::span<const ParamRef> params, double epsilon,
                           std::size_t samples, std::uint64_t seed) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) throw ConfigError("epsilon must lie in (0, 1e-2]");
  loss(true);
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!all_finite(params[p].grad->data)) throw NonFiniteGradient("analytic gradient of " + params[p].name);
    for (std::size_t i = 0; i < params[p].value->size(); ++i) coords.emplace_back(p, i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  coords.resize(std::min(samples, coords.size()));

  GradCheckReport report;
  for (const auto& [p, i] : coords) {
    double& x = params[p].value->data[i];
    const double saved = x;
    x = saved + epsilon;
    const double up = loss(false);
    x = saved - epsilon;
    const double down = loss(false);
    x = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = params[p].grad->data[i];
    if (!std::isfinite(numeric)) throw NonFiniteGradient("finite difference of " + params[p].name);
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
    ++report.coordinates;
    if (rel >= report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_param = params[p].name;
      report.worst_index = i;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace speechrt
