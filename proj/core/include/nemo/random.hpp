#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nemo {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Folds a tuple such as (seed, epoch, user, stream) into one seed so that
/// per-user streams are independent of iteration order.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

/// Stream tags for derive_seed, one per consumer of randomness.
enum class Stream : std::uint64_t {
  split = 1,
  prior_init,
  mlp_init,
  negatives,
  dynamic_pool,
  generative_pool,
  alpha,
  batch_shuffle,
  eval_negatives,
  synth,
  gradcheck,
};

inline std::uint64_t stream_seed(std::uint64_t seed, Stream s) noexcept {
  return derive_seed({seed, static_cast<std::uint64_t>(s)});
}

}  // namespace nemo
