#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nemo/dataset.hpp"
#include "nemo/sparse_matrix.hpp"

namespace nemo {

/// The heterogeneous user-item graph for one epoch: training positives and the
/// epoch's sampled negatives, with the degree vectors used for mean aggregation.
struct BipartiteGraph {
  SparseMatrix positive;  // N x M
  SparseMatrix negative;  // N x M, support disjoint from `positive`
  std::vector<double> user_positive_degree;
  std::vector<double> item_positive_degree;
  std::vector<double> item_negative_degree;
};

/// Duplicate pairs collapse to one edge. ContractError if a pair is both a
/// positive and a negative.
BipartiteGraph build_bipartite(std::size_t num_users, std::size_t num_items, std::span<const Interaction> positives,
                               std::span<const Interaction> negatives);

/// 1/degree per entry, 0 where the degree is 0.
std::vector<double> inverse_degrees(std::span<const double> degrees);

}  // namespace nemo
