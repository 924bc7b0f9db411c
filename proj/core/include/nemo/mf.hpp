#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nemo/adam.hpp"
#include "nemo/autodiff.hpp"
#include "nemo/dataset.hpp"
#include "nemo/evaluation.hpp"
#include "nemo/sampling.hpp"
#include "nemo/training.hpp"

namespace nemo {

enum class SocialRegKind { average, individual };

SocialRegKind parse_social_reg_kind(std::string_view s);
std::string to_string(SocialRegKind k);

struct MfConfig {
  std::size_t dim = 16;
  double beta = 0.1;
  double lambda_user = 0.001;
  double lambda_item = 0.001;
  SocialRegKind reg = SocialRegKind::average;

  void validate() const;
};

/// Cosine similarity of rows i and j of `ratings`; 0 when either row is empty.
double cosine_similarity(const SparseMatrix& ratings, std::size_t i, std::size_t j);

/// sim(i, j) on every stored social edge (i, j). Edges with zero similarity are
/// dropped.
SparseMatrix social_similarity(const SparseMatrix& social, const SparseMatrix& ratings);

/// Linear operator whose squared Frobenius image is the regularizer:
///   average:    row i = u_i - sum_j sim_ij u_j / sum_j max(sim_ij, 0)
///   individual: one row per stored (i, j), sqrt(sim_ij) * (u_i - u_j)
/// Users without neighbors or with zero similarity mass contribute nothing.
/// Individual weights must be non-negative (ContractError otherwise).
SparseMatrix social_reg_operator(const SparseMatrix& similarity, SocialRegKind kind);

double social_reg(const DenseMatrix& user, const SparseMatrix& similarity, SocialRegKind kind);

struct Rating {
  std::uint32_t user;
  std::uint32_t item;
  double value;
};

class MfModel {
 public:
  MfModel(std::size_t num_users, std::size_t num_items, const MfConfig& config, std::uint64_t seed);

  const MfConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }
  const DenseMatrix& user() const { return params_[user_].value; }
  const DenseMatrix& item() const { return params_[item_].value; }
  ParameterSet::Id user_id() const noexcept { return user_; }
  ParameterSet::Id item_id() const noexcept { return item_; }

 private:
  MfConfig config_;
  ParameterSet params_;
  ParameterSet::Id user_;
  ParameterSet::Id item_;
};

/// 1/2 sum (r - u.v)^2 over `ratings` + beta/2 * reg + lambda_user/2 ||U||^2 +
/// lambda_item/2 ||V||^2. `reg_operator` comes from social_reg_operator and must
/// outlive the tape. `penalty_weight` scales the three penalty terms (minibatches
/// pass their share of the ratings).
Var mf_loss(Tape& tape, MfModel& model, std::span<const Rating> ratings, const SparseMatrix& reg_operator,
            double penalty_weight = 1.0);
double mf_loss_value(MfModel& model, std::span<const Rating> ratings, const SparseMatrix& reg_operator);

struct MfFitResult {
  MfModel model;
  TrainReport report;
};

/// Ratings per epoch are the train positives (value 1) plus a fresh uniform
/// draw of sampler.negatives_per_user unobserved items per user (value 0).
/// Minibatches of config.batch_size take one Adam step each; the penalty terms
/// are split across batches in proportion to their size. Early stopping as in
/// fit(). The optimizer's own weight decay is not used.
MfFitResult mf_fit(const Dataset& dataset, const DatasetSplit& split, const MfConfig& mf, const SamplerConfig& sampler,
                   const TrainingConfig& config, const RankingProtocol& protocol, const EpochCallback& on_epoch = {});

MetricsReport evaluate_mf(const MfModel& model, std::span<const Interaction> targets, const UserItemIndex& observed,
                          const RankingProtocol& protocol);

Checkpoint make_mf_checkpoint(const MfModel& model);
void load_mf_checkpoint(const Checkpoint& ckpt, MfModel& model);

}  // namespace nemo
