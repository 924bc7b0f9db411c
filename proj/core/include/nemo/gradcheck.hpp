#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "nemo/autodiff.hpp"

namespace nemo {

/// Evaluates the loss at the current parameter values. When called with
/// `with_gradients == true` it must also leave d(loss)/d(value) in every
/// Parameter::grad of the set being checked.
using LossClosure = std::function<double(bool with_gradients)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Parameters with more coordinates than this are checked on a seeded sample.
  std::size_t max_coordinates_per_parameter = 4096;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Central-difference check of every parameter coordinate. Relative error is
/// |a - n| / max(|a|, |n|, 1e-8). Throws NumericError naming the parameter when
/// a perturbed loss is not finite. Parameter values are restored on return.
GradCheckResult finite_diff_check(const LossClosure& loss, ParameterSet& params, const GradCheckOptions& options = {});

}  // namespace nemo
