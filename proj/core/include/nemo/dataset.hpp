#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nemo/dense_matrix.hpp"
#include "nemo/sparse_matrix.hpp"

namespace nemo {

struct Interaction {
  std::uint32_t user;
  std::uint32_t item;
  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

/// Users, items, their feature matrices, the undirected social graph and the
/// observed binary interactions.
struct Dataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  DenseMatrix user_features;  // num_users x K1
  DenseMatrix item_features;  // num_items x K2
  SparseMatrix social;        // num_users x num_users, symmetric, zero diagonal
  SparseMatrix interactions;  // num_users x num_items, values 1

  /// All observed pairs in (user, item) order.
  std::vector<Interaction> interaction_list() const;
  /// Throws ContractError if any invariant is broken.
  void validate() const;
};

Dataset make_dataset(DenseMatrix user_features, DenseMatrix item_features, std::span<const Interaction> interactions,
                     std::span<const std::pair<std::uint32_t, std::uint32_t>> social_edges);

/// Per-user sorted item lists (observed interactions or a subset of them).
class UserItemIndex {
 public:
  UserItemIndex() = default;
  UserItemIndex(std::size_t num_users, std::span<const Interaction> pairs);

  std::span<const std::uint32_t> items(std::size_t user) const { return items_.at(user); }
  bool contains(std::size_t user, std::uint32_t item) const;
  std::size_t num_users() const noexcept { return items_.size(); }

 private:
  std::vector<std::vector<std::uint32_t>> items_;
};

struct DatasetPaths {
  std::string ratings;
  std::string social;
  std::string user_features;
  std::string item_features;
};

struct LoadReport {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicate_social_edges = 0;
  std::size_t duplicate_ratings = 0;
};

/// Reads the four text files. N and M come from the feature file headers.
/// Throws IngestionError with the offending line on malformed input.
Dataset load_dataset(const DatasetPaths& paths, LoadReport* report = nullptr);
void save_dataset(const Dataset& dataset, const DatasetPaths& paths);

/// Seeded uniform partition of the observed interactions, 8:1:1.
struct DatasetSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
  std::uint64_t seed = 0;
};

/// ContractError when fewer than 10 interactions exist. Each part is sorted.
DatasetSplit split_interactions(const Dataset& dataset, std::uint64_t seed);

}  // namespace nemo
