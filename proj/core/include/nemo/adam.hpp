#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nemo/autodiff.hpp"

namespace nemo {

/// Per-parameter first/second moment accumulators plus the shared step count.
/// Moments are sized lazily on the first step.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<DenseMatrix> first_moment;
  std::vector<DenseMatrix> second_moment;
};

/// One bias-corrected Adam update over `params`, reading each Parameter::grad.
/// Weight decay is coupled: weight_decay * value is added to the gradient before
/// the moments are updated, which matches the gradient of
/// (weight_decay / 2) * ||value||^2.
void adam_step(std::span<Parameter> params, AdamState& state, double lr, double weight_decay);

}  // namespace nemo
