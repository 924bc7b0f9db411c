#include "nemo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nemo/errors.hpp"
#include "nemo/random.hpp"

namespace nemo {

GradCheckResult finite_diff_check(const LossClosure& loss, ParameterSet& params, const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ContractError("finite_diff_check: step must be positive");

  const double base = loss(true);
  if (!std::isfinite(base)) throw NumericError("finite_diff_check: loss is not finite at the base point");
  std::vector<DenseMatrix> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params.all()) analytic.push_back(p.grad);

  Rng rng(stream_seed(options.seed, Stream::gradcheck));
  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = params[pi];
    std::vector<std::size_t> coords(p.value.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > options.max_coordinates_per_parameter) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coordinates_per_parameter);
      std::sort(coords.begin(), coords.end());
    }
    for (auto idx : coords) {
      double& x = p.value.values()[idx];
      const double saved = x;
      x = saved + options.step;
      const double up = loss(false);
      x = saved - options.step;
      const double down = loss(false);
      x = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_check: non-finite loss perturbing " + p.name + "[" + std::to_string(idx) + "]");
      }
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[pi].values()[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coordinates_checked;
      if (result.worst_parameter.empty() || rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = p.name;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  // Leave gradients as the analytic pass produced them.
  for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi].grad = analytic[pi];
  return result;
}

}  // namespace nemo
