#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nemo/dataset.hpp"
#include "nemo/evaluation.hpp"
#include "nemo/gradcheck.hpp"
#include "nemo/key_value.hpp"
#include "nemo/mf.hpp"
#include "nemo/model.hpp"
#include "nemo/sampling.hpp"
#include "nemo/synth.hpp"
#include "nemo/training.hpp"

namespace nemo::app {

enum class ModelKind { nemo, mf };

/// Everything a command needs. Built from defaults, then a key=value config
/// file, then --set overrides, then dedicated flags.
struct RunConfig {
  ModelKind model = ModelKind::nemo;
  ModelConfig nemo;
  SamplerConfig sampler;
  TrainingConfig train;
  RankingProtocol protocol;
  MfConfig mf;
  double mf_learning_rate = 0.01;
  std::optional<DatasetPaths> data;  // synthetic data when absent
  SynthConfig synth;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> ablate_levels{0, 1, 2, 3, 4, 5, 6};
};

/// Applies `kv` on top of `base`. Unknown keys and bad values raise ConfigError.
RunConfig apply_config(RunConfig base, const KeyValues& kv);
/// Every key, one per line, in a form apply_config reads back.
std::string to_text(const RunConfig& config);

/// All recognized config keys (synth.* included).
const std::vector<std::string>& config_keys();

std::string to_string(ModelKind k);

/// Loads the configured files or generates the synthetic dataset.
Dataset load_data(const RunConfig& config);

/// `dir` itself when it does not exist or is empty, otherwise `dir-<timestamp>`
/// (with a counter if that is taken too). Completed runs are never overwritten.
std::filesystem::path fresh_directory(const std::filesystem::path& dir);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

int cmd_synth(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);

/// One subdirectory `seed-<s>` per seed with config.txt, checkpoint.bin and
/// train_report.jsonl.
int cmd_train(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);

struct EvalRequest {
  /// A run directory from `train` (either one seed-<s> directory or the parent
  /// holding several), or a single checkpoint file.
  std::filesystem::path run;
  std::filesystem::path checkpoint;
  std::string part = "test";  // test | validation
  /// Overrides applied to each run's stored config (or to the base config
  /// when evaluating a bare checkpoint).
  KeyValues overrides;
};

/// Writes metrics.json and metrics.tsv to `out`; with several seeds these hold
/// mean and std, and per-seed reports go to metrics-seed-<s>.{json,tsv}.
int cmd_eval(const RunConfig& base, const EvalRequest& request, const std::filesystem::path& out, std::ostream& log);

/// One-axis-at-a-time sweep around the configured model on the configured data:
/// prior, sampler, levels (plain and gcn) and aggregation. Writes
/// ablation_<axis>.tsv per axis and ablation_runs.tsv with every run.
int cmd_ablate(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);

struct GradcheckOutcome {
  std::string model;
  std::uint64_t seed = 0;
  GradCheckResult result;
  double seconds = 0.0;
};

/// N=20, M=30, d=8, L=2 instance with the generative sampler, summed loss over
/// train positives, discrete negatives and generated negatives. `plant_bug`
/// doubles every analytic gradient.
GradcheckOutcome nemo_gradcheck(std::uint64_t seed, bool plant_bug = false);
/// N=10, M=12, k=4 instance of the regularized MF objective.
GradcheckOutcome mf_gradcheck(std::uint64_t seed, SocialRegKind reg, bool plant_bug = false);

/// Nonzero when any check exceeds `tolerance`.
int cmd_gradcheck(const RunConfig& config, double tolerance, bool plant_bug, std::ostream& log);

}  // namespace nemo::app
