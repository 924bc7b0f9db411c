#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nemo/autodiff.hpp"
#include "nemo/bipartite.hpp"
#include "nemo/dataset.hpp"
#include "nemo/generator.hpp"

namespace nemo {

enum class PriorKind { gaussian, uniform, none };
enum class AggregationKind { plain, gcn };

PriorKind parse_prior_kind(std::string_view s);
AggregationKind parse_aggregation_kind(std::string_view s);
std::string to_string(PriorKind k);
std::string to_string(AggregationKind k);

struct ModelConfig {
  std::size_t dim = 16;
  std::size_t levels = 2;
  double prior_std = 0.1;
  PriorKind prior = PriorKind::gaussian;
  bool self_loop = true;
  AggregationKind aggregation = AggregationKind::plain;
  /// Affine layers in the feature projections (user and item).
  std::size_t projection_layers = 1;
  /// Affine layers in the positive/negative propagation MLPs.
  std::size_t propagation_layers = 1;

  void validate() const;
};

struct PriorEmbeddings {
  DenseMatrix user;  // N x d
  DenseMatrix item;  // M x d
};

/// Seeded i.i.d. draws. Gaussian: N(0, std^2). Uniform: U(-std*sqrt(3), std*sqrt(3)),
/// which has the same variance. ContractError unless std > 0.
PriorEmbeddings init_priors(std::size_t num_users, std::size_t num_items, std::size_t dim, double std,
                            std::uint64_t seed, PriorKind kind = PriorKind::gaussian);

/// Parameters and layer layout of the model. Copying yields an independent
/// snapshot.
class NemoModel {
 public:
  NemoModel(const ModelConfig& config, std::size_t num_users, std::size_t num_items, std::size_t user_feature_dim,
            std::size_t item_feature_dim, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }

  std::vector<DenseLayer> user_projection;
  std::vector<DenseLayer> item_projection;
  std::vector<DenseLayer> positive_propagation;
  std::vector<DenseLayer> negative_propagation;
  std::optional<ParameterSet::Id> user_prior;
  std::optional<ParameterSet::Id> item_prior;
  Generator generator;

 private:
  ModelConfig config_;
  std::size_t num_users_;
  std::size_t num_items_;
  ParameterSet params_;
};

/// Operator applied once per aggregation level: H <- matrix * H (+ H when add_self).
struct SocialOperator {
  SparseMatrix matrix;
  bool add_self = true;
};

/// plain: the raw adjacency with the configured self-loop. gcn: the symmetric
/// normalization D^-1/2 (A + I) D^-1/2, which already contains the self term.
SocialOperator make_social_operator(const SparseMatrix& adjacency, AggregationKind kind, bool self_loop);

struct HiddenVars {
  Var user;  // H1
  Var item;  // H2
};

/// H1 = MLP_1(E) + P, H2 = MLP_2(F) + Q (prior terms omitted when disabled).
HiddenVars hidden_reps(Tape& tape, NemoModel& model, Var user_features, Var item_features);

/// L linear aggregation levels; L = 0 returns `h` unchanged.
Var social_aggregate(const SocialOperator& op, Var h, std::size_t levels);
DenseMatrix social_aggregate(const SocialOperator& op, const DenseMatrix& h, std::size_t levels);

struct PropagatedVars {
  Var user;  // H1 hat
  Var item;  // H2 hat
};

/// Mean-aggregated interest propagation over the positive/negative bipartite
/// graph. Rows with zero degree receive no contribution from that term.
PropagatedVars interest_propagate(Tape& tape, NemoModel& model, const BipartiteGraph& graph, Var user_aggregated,
                                  Var item_hidden);

struct ForwardVars {
  HiddenVars hidden;
  Var user_aggregated;
  PropagatedVars out;
};

/// Full pass on one tape. `social` and `graph` must outlive the tape.
ForwardVars forward(Tape& tape, NemoModel& model, const Dataset& dataset, const SocialOperator& social,
                    const BipartiteGraph& graph);

struct Representations {
  DenseMatrix user;
  DenseMatrix item;
  DenseMatrix item_hidden;  // H2, before propagation
};

/// Forward without keeping a tape around.
Representations compute_representations(NemoModel& model, const Dataset& dataset, const SocialOperator& social,
                                        const BipartiteGraph& graph);

/// <user_reps(u,:), item_reps(i,:)> for each pair.
std::vector<double> predict(const DenseMatrix& user_reps, const DenseMatrix& item_reps,
                            std::span<const Interaction> pairs);

}  // namespace nemo
