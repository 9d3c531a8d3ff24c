#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "speechrt/tensor.hpp"

namespace speechrt {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Called with `true` it must zero and fill every ParamRef::grad and return the
// loss; with `false` it only evaluates the loss at the current values.
using LossFunction = std::function<double(bool with_gradient)>;

// Relative error is |a - n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-6;

// Central differences on `samples` coordinates drawn without replacement.
// Throws NonFiniteGradient.
GradCheckReport grad_check(const LossFunction& loss, std::span<const ParamRef> params, double epsilon,
                           std::size_t samples = 200, std::uint64_t seed = 0);

}  // namespace speechrt
