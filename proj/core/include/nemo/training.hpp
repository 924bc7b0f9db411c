#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nemo/adam.hpp"
#include "nemo/bipartite.hpp"
#include "nemo/checkpoint.hpp"
#include "nemo/dataset.hpp"
#include "nemo/evaluation.hpp"
#include "nemo/model.hpp"
#include "nemo/sampling.hpp"

namespace nemo {

struct TrainingConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 200;
  double weight_decay = 0.001;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  /// When set, fit() writes each epoch's negatives to
  /// <dir>/samples-epoch-<e>.tsv (see write_sample_dump).
  std::string sample_dump_dir;

  void validate() const;
};

/// sum_k (targets[k] - scores[k])^2.
double mse_loss(std::span<const double> scores, std::span<const double> targets);

/// Everything one epoch needs that does not change between epochs.
struct TrainingContext {
  const Dataset* dataset = nullptr;
  const DatasetSplit* split = nullptr;
  UserItemIndex observed;         // every interaction, all splits
  UserItemIndex train_positives;  // train part only
  SocialOperator social;
};

TrainingContext make_training_context(const Dataset& dataset, const DatasetSplit& split, const ModelConfig& config);

struct EpochResult {
  /// Sum of squared residuals over every triple of the epoch, before the
  /// per-batch 1/batch scaling applied to the optimized objective.
  double loss = 0.0;
  std::size_t triples = 0;
  std::size_t fakes = 0;
  /// Mean L2 norm of the generated negatives (0 when none).
  double fake_norm = 0.0;
  NegativeSampleSet negatives;
};

/// One pass over the shuffled triples of train positives (target 1), the
/// epoch's discrete negatives (target 0) and, for the generative kind, the
/// generated negatives (target 0). Each batch runs a full forward pass, scales
/// the summed squared error by 1/batch and takes one Adam step. Throws
/// NumericError on a non-finite loss.
///
/// `previous` is the bipartite graph of the previous epoch; the dynamic kind
/// scores its candidates with the model under that graph.
EpochResult train_epoch(const TrainingContext& ctx, NemoModel& model, AdamState& adam, const SamplerConfig& sampler,
                        const TrainingConfig& config, std::size_t epoch, const BipartiteGraph& previous);

/// The model's representations under the train positives plus `negatives`.
Representations representations_with(const TrainingContext& ctx, NemoModel& model,
                                     std::span<const Interaction> negatives);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::size_t triples = 0;
  std::size_t fakes = 0;
  double fake_norm = 0.0;
  MetricsReport validation;
  double seconds = 0.0;
};

struct TrainReport {
  std::string model = "nemo";
  std::string sampler;
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  double best_ndcg10 = 0.0;
  std::vector<EpochRecord> epochs;
};

/// One JSON object per epoch.
std::string to_jsonl(const TrainReport& report);

struct FitResult {
  NemoModel model;                       // parameters of the best epoch
  std::vector<Interaction> negatives;    // that epoch's discrete negatives
  TrainReport report;
};

/// Called after every epoch; handy for progress output.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains from a freshly initialized model until max_epochs or until
/// validation NDCG@10 has not strictly improved for `patience` epochs.
FitResult fit(const Dataset& dataset, const DatasetSplit& split, const ModelConfig& model_config,
              const SamplerConfig& sampler, const TrainingConfig& config, const RankingProtocol& protocol,
              const EpochCallback& on_epoch = {});

/// Scores `targets` with the model under the train positives plus `negatives`.
MetricsReport evaluate_model(const TrainingContext& ctx, NemoModel& model, std::span<const Interaction> negatives,
                             std::span<const Interaction> targets, const RankingProtocol& protocol);

/// Parameters as named blocks, plus the epoch negatives under "graph.negatives"
/// (rows of user, item).
Checkpoint make_checkpoint(const NemoModel& model, std::span<const Interaction> negatives);
/// Copies every parameter block into `model`. ConfigError when a block is
/// missing or its shape differs, naming both shapes. Returns the stored negatives.
std::vector<Interaction> load_checkpoint(const Checkpoint& ckpt, NemoModel& model);

}  // namespace nemo
