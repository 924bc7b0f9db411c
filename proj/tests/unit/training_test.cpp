#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "nemo/dataset.hpp"
#include "nemo/errors.hpp"
#include "nemo/synth.hpp"
#include "nemo/training.hpp"

using namespace nemo;

namespace {

Dataset tiny_fixture() {
  const std::string dir = NEMO_FIXTURE_DIR "/tiny/";
  return load_dataset({dir + "ratings.tsv", dir + "social.tsv", dir + "user_features.txt", dir + "item_features.txt"});
}

Dataset small_synth(std::uint64_t seed = 1) {
  return synth_generate(SynthConfig{.communities = 2, .users_per_community = 15, .items_per_community = 20,
                                    .social_within = 0.1, .feature_dim = 4, .seed = seed})
      .dataset;
}

struct TrainingRun {
  Dataset data;
  DatasetSplit split;
  ModelConfig model_config;
  TrainingContext ctx;
  NemoModel model;
  BipartiteGraph graph;

  explicit TrainingRun(Dataset d, std::uint64_t seed = 1, ModelConfig mc = small_model())
      : data(std::move(d)),
        split(split_interactions(data, seed)),
        model_config(mc),
        ctx(make_training_context(data, split, mc)),
        model(mc, data.num_users, data.num_items, data.user_features.cols(), data.item_features.cols(), seed),
        graph(build_bipartite(data.num_users, data.num_items, split.train, {})) {}

  static ModelConfig small_model() {
    ModelConfig c;
    c.dim = 8;
    return c;
  }
};

std::vector<DenseMatrix> values_of(const NemoModel& m) {
  std::vector<DenseMatrix> out;
  for (const auto& p : m.params().all()) out.push_back(p.value);
  return out;
}

}  // namespace

TEST(MseLoss, Examples) {
  std::vector<double> a{0.3, -1.0, 2.0};
  EXPECT_EQ(mse_loss(a, a), 0.0);
  EXPECT_EQ(mse_loss(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 2.0);
  EXPECT_THROW(mse_loss(std::vector<double>{1}, std::vector<double>{1, 2}), DimensionError);
}

TEST(MseLoss, MatchesLoop) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 2);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> s(37), y(37);
    for (auto& v : s) v = n(rng);
    for (auto& v : y) v = n(rng);
    long double e = 0;
    for (std::size_t k = 0; k < s.size(); ++k) e += (static_cast<long double>(y[k]) - s[k]) * (y[k] - s[k]);
    EXPECT_NEAR(mse_loss(s, y), static_cast<double>(e), 1e-12);
  }
}

TEST(TrainingConfig, Validation) {
  TrainingConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.patience = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrainEpoch, ZeroLearningRateLeavesParameters) {
  TrainingRun r(small_synth());
  const auto before = values_of(r.model);
  AdamState adam;
  TrainingConfig tc;
  tc.learning_rate = 0.0;
  SamplerConfig sc;
  auto er = train_epoch(r.ctx, r.model, adam, sc, tc, 0, r.graph);
  EXPECT_GT(er.loss, 0.0);
  EXPECT_EQ(values_of(r.model), before);
}

TEST(TrainEpoch, TinyFixtureBitReproducible) {
  auto data = tiny_fixture();
  DatasetSplit split;
  split.train = data.interaction_list();
  ModelConfig mc;
  mc.dim = 4;
  auto run_once = [&] {
    auto ctx = make_training_context(data, split, mc);
    NemoModel m(mc, 3, 2, 2, 3, 5);
    AdamState adam;
    SamplerConfig sc;
    sc.negatives_per_user = 1;
    auto er = train_epoch(ctx, m, adam, sc, TrainingConfig{}, 0, build_bipartite(3, 2, split.train, {}));
    return std::pair{er.loss, values_of(m)};
  };
  auto a = run_once(), b = run_once();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(TrainEpoch, CountsTriplesAndFakes) {
  TrainingRun r(small_synth());
  AdamState adam;
  SamplerConfig sc;
  auto er = train_epoch(r.ctx, r.model, adam, sc, TrainingConfig{}, 0, r.graph);
  EXPECT_EQ(er.fakes, r.split.train.size());
  EXPECT_EQ(er.triples, r.split.train.size() + er.negatives.discrete_count() + er.fakes);
  EXPECT_GT(er.fake_norm, 0.0);
  sc.kind = SamplerKind::resample;
  auto er2 = train_epoch(r.ctx, r.model, adam, sc, TrainingConfig{}, 1, r.graph);
  EXPECT_EQ(er2.fakes, 0u);
  EXPECT_EQ(er2.fake_norm, 0.0);
}

TEST(TrainEpoch, EveryParameterReceivesGradient) {
  // Without weight decay Adam only moves coordinates whose gradient was nonzero
  // at some step, so a block that never moves was detached from the loss.
  TrainingRun r(small_synth(2));
  const auto before = values_of(r.model);
  AdamState adam;
  TrainingConfig tc;
  tc.weight_decay = 0.0;
  tc.batch_size = 50;
  auto er = train_epoch(r.ctx, r.model, adam, SamplerConfig{}, tc, 0, r.graph);
  ASSERT_GT(er.fakes, 0u);
  const auto after = values_of(r.model);
  for (std::size_t k = 0; k < before.size(); ++k) {
    EXPECT_NE(before[k], after[k]) << r.model.params()[k].name;
  }
}

TEST(TrainEpoch, LossDecreasesOnSyntheticDefault) {
  const auto data = synth_generate(SynthConfig{}).dataset;
  const auto split = split_interactions(data, 1);
  ModelConfig mc;
  const auto ctx = make_training_context(data, split, mc);
  NemoModel m(mc, data.num_users, data.num_items, data.user_features.cols(), data.item_features.cols(), 1);
  AdamState adam;
  SamplerConfig sc;
  sc.kind = SamplerKind::fixed;  // same negatives each epoch, so losses are comparable
  TrainingConfig tc;
  BipartiteGraph prev = build_bipartite(data.num_users, data.num_items, split.train, {});
  std::vector<double> losses;
  for (std::size_t e = 0; e < 20; ++e) {
    auto er = train_epoch(ctx, m, adam, sc, tc, e, prev);
    ASSERT_TRUE(std::isfinite(er.loss));
    losses.push_back(er.loss);
    prev = build_bipartite(data.num_users, data.num_items, split.train, er.negatives.pairs());
  }
  EXPECT_LT(losses[4], losses[0]);
  EXPECT_LT(losses[19], losses[0]);
}

TEST(TrainEpoch, NonFiniteLossAborts) {
  TrainingRun r(small_synth());
  r.model.params()[*r.model.user_prior].value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  AdamState adam;
  EXPECT_THROW(train_epoch(r.ctx, r.model, adam, SamplerConfig{}, TrainingConfig{}, 0, r.graph), NumericError);
}

TEST(Fit, PatienceOneWithFrozenMetricsStopsAfterTwoEpochs) {
  const auto data = small_synth(3);
  const auto split = split_interactions(data, 3);
  SamplerConfig sc;
  sc.kind = SamplerKind::fixed;
  TrainingConfig tc;
  tc.learning_rate = 0.0;
  tc.patience = 1;
  tc.max_epochs = 50;
  auto res = fit(data, split, TrainingRun::small_model(), sc, tc, RankingProtocol{.negatives = 50});
  ASSERT_EQ(res.report.epochs.size(), 2u);
  EXPECT_EQ(res.report.epochs[0].validation.ndcg, res.report.epochs[1].validation.ndcg);
  EXPECT_EQ(res.report.best_epoch, 0u);
}

TEST(Fit, ReproducibleForSeed) {
  const auto data = small_synth(4);
  const auto split = split_interactions(data, 4);
  TrainingConfig tc;
  tc.max_epochs = 3;
  tc.seed = 4;
  auto a = fit(data, split, TrainingRun::small_model(), SamplerConfig{}, tc, RankingProtocol{.negatives = 50, .seed = 4});
  auto b = fit(data, split, TrainingRun::small_model(), SamplerConfig{}, tc, RankingProtocol{.negatives = 50, .seed = 4});
  ASSERT_EQ(a.report.epochs.size(), b.report.epochs.size());
  for (std::size_t e = 0; e < a.report.epochs.size(); ++e) {
    EXPECT_EQ(a.report.epochs[e].loss, b.report.epochs[e].loss);
    EXPECT_EQ(a.report.epochs[e].validation.ndcg, b.report.epochs[e].validation.ndcg);
  }
  EXPECT_EQ(values_of(a.model), values_of(b.model));
}

TEST(Fit, BestCheckpointReproducesValidationNdcg) {
  const auto data = small_synth(5);
  const auto split = split_interactions(data, 5);
  TrainingConfig tc;
  tc.max_epochs = 6;
  tc.learning_rate = 0.01;
  const RankingProtocol protocol{.negatives = 100, .seed = 5};
  auto res = fit(data, split, TrainingRun::small_model(), SamplerConfig{}, tc, protocol);
  const auto& best = res.report.epochs.at(res.report.best_epoch);

  const auto bytes = encode_checkpoint(make_checkpoint(res.model, res.negatives));
  NemoModel fresh(TrainingRun::small_model(), data.num_users, data.num_items, data.user_features.cols(),
                  data.item_features.cols(), 999);
  const auto negatives = load_checkpoint(decode_checkpoint(bytes), fresh);
  EXPECT_EQ(negatives, res.negatives);
  const auto ctx = make_training_context(data, split, TrainingRun::small_model());
  auto reloaded = evaluate_model(ctx, fresh, negatives, split.validation, protocol);
  EXPECT_EQ(reloaded.ndcg, best.validation.ndcg);
  EXPECT_EQ(reloaded.hr, best.validation.hr);
  auto in_memory = evaluate_model(ctx, res.model, res.negatives, split.validation, protocol);
  EXPECT_EQ(reloaded.ndcg, in_memory.ndcg);
}

TEST(Checkpoint, ShapeMismatchNamesBothShapes) {
  const auto data = small_synth(6);
  ModelConfig a = TrainingRun::small_model(), b = TrainingRun::small_model();
  b.dim = 6;
  NemoModel ma(a, data.num_users, data.num_items, 4, 4, 1), mb(b, data.num_users, data.num_items, 4, 4, 1);
  try {
    load_checkpoint(make_checkpoint(ma, {}), mb);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("30x40x8x2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("expects 30x40x6x2"), std::string::npos) << msg;
  }
}

TEST(TrainReport, JsonlHasOneLinePerEpoch) {
  TrainReport r;
  r.sampler = "generative";
  r.seed = 2;
  r.best_epoch = 1;
  for (std::size_t e = 0; e < 3; ++e) {
    EpochRecord rec;
    rec.epoch = e;
    rec.loss = 1.5;
    rec.validation.ks = {10};
    rec.validation.hr = {0.25};
    rec.validation.ndcg = {0.125};
    r.epochs.push_back(rec);
  }
  const auto text = to_jsonl(r);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_NE(text.find("\"epoch\":1,\"loss\":1.5"), std::string::npos);
  EXPECT_NE(text.find("\"val_ndcg\":[0.125]"), std::string::npos);
  EXPECT_NE(text.find("\"best\":true"), std::string::npos);
}
