#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nemo/dataset.hpp"
#include "nemo/key_value.hpp"

namespace nemo {

/// Planted-community generator settings. Config-file keys (all optional):
///
///   communities, users_per_community, items_per_community,
///   social_within, social_cross,            user-user edge probabilities
///   interact_within, popularity_decay,      in-block item k (by popularity) is
///                                           chosen with interact_within * decay^k
///   interact_cross,                         out-of-block interaction probability
///   feature_dim, feature_scale,             features are feature_scale * (centroid + noise),
///   feature_noise, seed                     centroid ~ N(0, 1), noise ~ N(0, feature_noise^2)
struct SynthConfig {
  std::size_t communities = 4;
  std::size_t users_per_community = 50;
  std::size_t items_per_community = 60;
  double social_within = 0.04;
  double social_cross = 0.002;
  double interact_within = 0.95;
  double popularity_decay = 0.85;
  double interact_cross = 0.001;
  std::size_t feature_dim = 16;
  double feature_scale = 0.05;
  double feature_noise = 0.3;
  std::uint64_t seed = 1;
};

/// Unknown keys and out-of-range values raise ConfigError. Keys may carry a
/// `synth.` prefix (as in a run config); keys without it are accepted too.
SynthConfig synth_config_from(const KeyValues& kv, bool prefixed);
std::string synth_config_to_text(const SynthConfig& config);

struct SyntheticData {
  Dataset dataset;
  std::vector<std::uint32_t> user_community;
  std::vector<std::uint32_t> item_community;
};

/// Users of community c are ids [c*U, (c+1)*U); items likewise. Features are a
/// scaled per-community Gaussian centroid plus relative noise. Item
/// popularity order inside each block is a seeded permutation.
SyntheticData synth_generate(const SynthConfig& config);

/// Newman assortativity of the user-community x item-community mixing matrix of
/// the interactions (1 = every interaction inside its own community).
double interaction_assortativity(const SparseMatrix& interactions, std::span<const std::uint32_t> user_community,
                                 std::span<const std::uint32_t> item_community, std::size_t communities);

}  // namespace nemo
