#include "nemo/adam.hpp"

#include <cmath>

#include "nemo/errors.hpp"

namespace nemo {

void adam_step(std::span<Parameter> params, AdamState& state, double lr, double weight_decay) {
  if (!(lr >= 0.0)) throw ContractError("adam_step: learning rate must be non-negative");
  if (!(weight_decay >= 0.0)) throw ContractError("adam_step: weight decay must be non-negative");

  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.value.rows(), p.value.cols());
      state.second_moment.emplace_back(p.value.rows(), p.value.cols());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: parameter count changed between steps");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (!p.grad.same_shape(p.value) || !state.first_moment[k].same_shape(p.value)) {
      throw DimensionError("adam_step: shape mismatch for " + p.name);
    }
    auto value = p.value.values();
    auto grad = p.grad.values();
    auto m = state.first_moment[k].values();
    auto v = state.second_moment[k].values();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] + weight_decay * value[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace nemo
