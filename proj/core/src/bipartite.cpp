#include "nemo/bipartite.hpp"

#include <algorithm>

#include "nemo/errors.hpp"

namespace nemo {

namespace {

SparseMatrix binary_matrix(std::size_t rows, std::size_t cols, std::vector<Interaction> pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  std::vector<Triplet> t;
  t.reserve(pairs.size());
  for (const auto& p : pairs) t.push_back({p.user, p.item, 1.0});
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

}  // namespace

BipartiteGraph build_bipartite(std::size_t num_users, std::size_t num_items, std::span<const Interaction> positives,
                               std::span<const Interaction> negatives) {
  BipartiteGraph g;
  g.positive = binary_matrix(num_users, num_items, {positives.begin(), positives.end()});
  g.negative = binary_matrix(num_users, num_items, {negatives.begin(), negatives.end()});
  for (const auto& t : g.negative.triplets()) {
    if (g.positive.contains(t.row, t.col)) {
      throw ContractError("build_bipartite: pair (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                          ") is both positive and negative");
    }
  }
  g.user_positive_degree = g.positive.row_sums();
  g.item_positive_degree = g.positive.col_sums();
  g.item_negative_degree = g.negative.col_sums();
  return g;
}

std::vector<double> inverse_degrees(std::span<const double> degrees) {
  std::vector<double> out(degrees.size(), 0.0);
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    if (degrees[i] > 0.0) out[i] = 1.0 / degrees[i];
  }
  return out;
}

}  // namespace nemo
