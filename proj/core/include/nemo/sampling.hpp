#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nemo/autodiff.hpp"
#include "nemo/dataset.hpp"
#include "nemo/generator.hpp"
#include "nemo/random.hpp"

namespace nemo {

enum class SamplerKind { fixed, resample, dynamic, generative };

SamplerKind parse_sampler_kind(std::string_view s);
/// "fixed", "static", "dynamic" or "generative".
std::string to_string(SamplerKind k);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::generative;
  std::size_t negatives_per_user = 8;
  /// Unobserved items pooled into each generated negative.
  std::size_t pool_size = 4;
  /// alpha ~ Beta(beta, beta).
  double beta = 1.0;
  /// Dynamic kind scores this many times negatives_per_user uniform candidates.
  std::size_t dynamic_multiplier = 10;
  /// Anchor generated negatives at post-propagation item rows (true) or at the
  /// hidden item rows before propagation (false).
  bool anchor_propagated = true;

  void validate() const;
};

struct UniformDraw {
  std::vector<std::uint32_t> items;  // sorted, distinct
  bool exhausted = false;            // fewer unobserved items than requested
};

/// n distinct items drawn uniformly without replacement from [0, num_items)
/// minus `observed` (sorted). Returns every unobserved item and sets `exhausted`
/// when fewer than n exist.
UniformDraw uniform_sample(std::span<const std::uint32_t> observed, std::size_t num_items, std::size_t n, Rng& rng);

/// A generated negative for `user`: anchor = the positive item whose
/// representation feeds g, pooled with `pool_items`, mixed by `alpha`.
struct FakeNegative {
  std::uint32_t user;
  std::uint32_t anchor_item;
  std::vector<std::uint32_t> pool_items;
  double alpha;
};

struct NegativeSampleSet {
  std::size_t epoch = 0;
  std::vector<std::vector<std::uint32_t>> items;  // per user, sorted
  std::vector<FakeNegative> fakes;
  /// z' of every fake under the snapshot the set was assembled with (empty when
  /// no snapshot was given). Training recomputes z' on the tape.
  DenseMatrix fake_embeddings;
  std::size_t users_exhausted = 0;

  std::vector<Interaction> pairs() const;
  std::size_t discrete_count() const;
};

/// Fresh uniform draw per user seeded by (seed, epoch, user). The fixed kind
/// always uses epoch 0.
NegativeSampleSet static_resample(const UserItemIndex& observed, std::size_t num_items, const SamplerConfig& config,
                                  std::size_t epoch, std::uint64_t seed);

struct ScoredItem {
  std::uint32_t item;
  double score;
};

/// The n highest-scoring candidates, ties to the smaller item id. Sorted by id.
std::vector<std::uint32_t> select_hard_negatives(std::span<const ScoredItem> candidates, std::size_t n);

/// Scores dynamic_multiplier * n uniform unobserved candidates per user with
/// <user_reps(u), item_reps(i)> and keeps the top n.
NegativeSampleSet dynamic_resample(const UserItemIndex& observed, const DenseMatrix& user_reps,
                                   const DenseMatrix& item_reps, const SamplerConfig& config, std::size_t epoch,
                                   std::uint64_t seed);

/// alpha ~ Beta(b, b) via two Gamma(b, 1) draws.
double sample_alpha(double b, Rng& rng);

/// Arithmetic mean. ContractError on an empty list.
std::vector<double> pool(std::span<const std::vector<double>> embeddings);

/// z' = alpha * g(z) + (1 - alpha) * pooled.
std::vector<double> generate_fake(std::span<const double> z, std::span<const double> pooled, double alpha,
                                  const ParameterSet& params, const Generator& generator);

/// Tape version over a batch: rows of `anchors` and `pooled` pair up with `alphas`.
Var generate_fakes(Tape& tape, ParameterSet& params, const Generator& generator, Var anchors, Var pooled,
                   const std::vector<double>& alphas);

/// Row k averages the pool items of fakes[k]; multiplying by the item matrix
/// yields the pooled offsets.
SparseMatrix pooling_matrix(std::span<const FakeNegative> fakes, std::size_t num_items);

/// Snapshot used to score dynamic candidates and to materialize z'.
struct SamplerSnapshot {
  const DenseMatrix* user_reps = nullptr;
  const DenseMatrix* item_reps = nullptr;  // the anchor rows (see anchor_propagated)
  const ParameterSet* params = nullptr;
  const Generator* generator = nullptr;
};

/// Discrete part per kind, plus for the generative kind one fake per
/// (user, training positive) with a fresh uniform pool of pool_size items.
/// Dynamic kind requires snapshot.user_reps/item_reps.
NegativeSampleSet assemble_negatives(const UserItemIndex& observed, const UserItemIndex& train_positives,
                                     std::size_t num_items, const SamplerSnapshot& snapshot,
                                     const SamplerConfig& config, std::size_t epoch, std::uint64_t seed);

/// Audit dump: `user<TAB>item` per discrete negative, then `user<TAB>fakes=<n>` per user.
void write_sample_dump(const std::string& path, const NegativeSampleSet& set);

}  // namespace nemo
