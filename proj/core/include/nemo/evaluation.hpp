#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nemo/dataset.hpp"
#include "nemo/dense_matrix.hpp"

namespace nemo {

struct RankingProtocol {
  std::size_t negatives = 1000;
  std::vector<std::size_t> ks{5, 10, 15};
  std::uint64_t seed = 0;

  /// ConfigError unless negatives >= 1 and ks is positive and strictly ascending.
  void validate() const;
};

struct CandidateSet {
  std::vector<std::uint32_t> items;  // sorted by id
  bool exhausted = false;            // fewer unrated items than requested
};

/// Targets plus protocol.negatives uniform draws from the items the user never
/// interacted with in any split. The draw depends only on (protocol.seed, user).
CandidateSet build_candidates(std::uint32_t user, std::span<const std::uint32_t> targets,
                              std::span<const std::uint32_t> observed, std::size_t num_items,
                              const RankingProtocol& protocol);

/// Candidates ordered by descending score, ties by ascending item id.
std::vector<std::uint32_t> rank_candidates(std::span<const std::uint32_t> candidates, std::span<const double> scores);

/// Per-user metrics. `targets` must be sorted.
double hr_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> targets, std::size_t k);
double ndcg_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> targets, std::size_t k);

/// Fills scores[j] for (user, items[j]).
using Scorer = std::function<void(std::uint32_t user, std::span<const std::uint32_t> items, std::span<double> scores)>;

/// Inner products of user and item representation rows. Both matrices are
/// captured by reference.
Scorer inner_product_scorer(const DenseMatrix& user_reps, const DenseMatrix& item_reps);

struct MetricsReport {
  std::string model;
  std::uint64_t seed = 0;
  std::vector<std::size_t> ks;
  std::vector<double> hr;
  std::vector<double> ndcg;
  std::size_t users_evaluated = 0;
  std::size_t users_exhausted = 0;

  double ndcg_at(std::size_t k) const;
  double hr_at(std::size_t k) const;
};

/// Averages over users that have at least one target. ContractError on an
/// empty target list.
MetricsReport evaluate(const Scorer& scorer, std::span<const Interaction> targets, const UserItemIndex& observed,
                       std::size_t num_items, const RankingProtocol& protocol, const std::string& model = "");

struct MetricsSummary {
  std::string model;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> ks;
  std::vector<double> hr_mean, hr_std, ndcg_mean, ndcg_std;
};

/// Mean and sample standard deviation (0 for a single report) per K.
MetricsSummary summarize(std::span<const MetricsReport> reports);

std::string to_json(const MetricsReport& report);
std::string to_json(const MetricsSummary& summary);
/// Header `k<TAB>hr<TAB>ndcg`, one row per K.
std::string to_tsv(const MetricsReport& report);
/// Header `k<TAB>hr_mean<TAB>hr_std<TAB>ndcg_mean<TAB>ndcg_std`, one row per K.
std::string to_tsv(const MetricsSummary& summary);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace nemo
