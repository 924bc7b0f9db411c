#pragma once

#include <cstdint>
#include <vector>

#include "nemo/autodiff.hpp"

namespace nemo {

/// Fake-negative generator g: a two-layer sigmoid MLP d -> d -> d.
struct Generator {
  std::vector<DenseLayer> layers;
};

/// Registers `gen.0.*` and `gen.1.*` in `params`.
Generator make_generator(ParameterSet& params, std::size_t dim, std::uint64_t seed);

inline Var generator_forward(Tape& tape, ParameterSet& params, const Generator& g, Var z) {
  return mlp_forward(tape, params, g.layers, z);
}

inline DenseMatrix generator_apply(const ParameterSet& params, const Generator& g, const DenseMatrix& z) {
  return mlp_apply(params, g.layers, z);
}

}  // namespace nemo
