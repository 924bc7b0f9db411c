#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "nemo/errors.hpp"
#include "nemo/mf.hpp"
#include "nemo/synth.hpp"
#include "nemo_app/app.hpp"

using namespace nemo;
using testing_util::random_dense;

namespace {

double cosine_oracle(const DenseMatrix& r, std::size_t i, std::size_t j) {
  double dot = 0, ni = 0, nj = 0;
  for (std::size_t c = 0; c < r.cols(); ++c) {
    dot += r(i, c) * r(j, c);
    ni += r(i, c) * r(i, c);
    nj += r(j, c) * r(j, c);
  }
  if (ni == 0 || nj == 0) return 0.0;
  return dot / std::sqrt(ni * nj);
}

double average_oracle(const DenseMatrix& u, const SparseMatrix& social, const DenseMatrix& sim) {
  double total = 0.0;
  for (std::size_t i = 0; i < u.rows(); ++i) {
    double mass = 0.0;
    std::vector<double> acc(u.cols(), 0.0);
    for (std::size_t j = 0; j < u.rows(); ++j) {
      if (!social.contains(i, j)) continue;
      mass += std::max(sim(i, j), 0.0);
      for (std::size_t k = 0; k < u.cols(); ++k) acc[k] += sim(i, j) * u(j, k);
    }
    if (mass == 0.0) continue;
    for (std::size_t k = 0; k < u.cols(); ++k) total += std::pow(u(i, k) - acc[k] / mass, 2);
  }
  return total;
}

double individual_oracle(const DenseMatrix& u, const SparseMatrix& social, const DenseMatrix& sim) {
  double total = 0.0;
  for (std::size_t i = 0; i < u.rows(); ++i)
    for (std::size_t j = 0; j < u.rows(); ++j) {
      if (!social.contains(i, j)) continue;
      for (std::size_t k = 0; k < u.cols(); ++k) total += sim(i, j) * std::pow(u(i, k) - u(j, k), 2);
    }
  return total;
}

SyntheticData mf_world(std::uint64_t seed) {
  return synth_generate(SynthConfig{.communities = 2, .users_per_community = 12, .items_per_community = 10,
                                    .social_within = 0.4, .social_cross = 0.05, .interact_within = 0.8,
                                    .popularity_decay = 0.95, .interact_cross = 0.05, .feature_dim = 2, .seed = seed});
}

}  // namespace

TEST(Cosine, Examples) {
  auto r = SparseMatrix::from_triplets(4, 4, {{0, 0, 1}, {0, 2, 1}, {1, 0, 1}, {1, 2, 1}, {2, 1, 1}, {2, 3, 1}});
  EXPECT_DOUBLE_EQ(cosine_similarity(r, 0, 1), 1.0);
  EXPECT_EQ(cosine_similarity(r, 0, 2), 0.0);
  EXPECT_EQ(cosine_similarity(r, 0, 3), 0.0);  // empty row
}

TEST(Cosine, MatchesScalarOracle) {
  auto r = testing_util::random_sparse(12, 9, 0.4, 3);
  auto dense = r.to_dense();
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j) EXPECT_NEAR(cosine_similarity(r, i, j), cosine_oracle(dense, i, j), 1e-14);
}

TEST(SocialReg, SharedEmbeddingIsZero) {
  auto world = mf_world(1);
  auto sim = social_similarity(world.dataset.social, world.dataset.interactions);
  DenseMatrix u(world.dataset.num_users, 3);
  for (std::size_t r = 0; r < u.rows(); ++r) {
    u(r, 0) = 0.4;
    u(r, 1) = -2.0;
    u(r, 2) = 1.0;
  }
  EXPECT_NEAR(social_reg(u, sim, SocialRegKind::average), 0.0, 1e-28);
  EXPECT_EQ(social_reg(u, sim, SocialRegKind::individual), 0.0);
}

TEST(SocialReg, TwoNeighborIndividualHandSum) {
  auto sim = SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
  auto u = DenseMatrix::from_rows({{1, 0}, {0, 0}});
  EXPECT_DOUBLE_EQ(social_reg(u, sim, SocialRegKind::individual), 2.0);
  // Average: each user's single neighbor is the mean, so the same two unit terms.
  EXPECT_DOUBLE_EQ(social_reg(u, sim, SocialRegKind::average), 2.0);
}

TEST(SocialReg, MatchesLoopOracles) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto world = mf_world(seed);
    const auto& d = world.dataset;
    auto sim = social_similarity(d.social, d.interactions);
    DenseMatrix sim_dense(d.num_users, d.num_users);
    for (std::size_t i = 0; i < d.num_users; ++i)
      for (std::size_t j = 0; j < d.num_users; ++j)
        if (d.social.contains(i, j)) sim_dense(i, j) = cosine_oracle(d.interactions.to_dense(), i, j);
    auto u = random_dense(d.num_users, 4, seed);
    EXPECT_NEAR(social_reg(u, sim, SocialRegKind::average), average_oracle(u, d.social, sim_dense), 1e-10);
    EXPECT_NEAR(social_reg(u, sim, SocialRegKind::individual), individual_oracle(u, d.social, sim_dense), 1e-10);
  }
}

TEST(SocialReg, NegativeIndividualWeightRejected) {
  auto sim = SparseMatrix::from_triplets(2, 2, {{0, 1, -0.5}, {1, 0, -0.5}});
  EXPECT_THROW(social_reg_operator(sim, SocialRegKind::individual), ContractError);
}

TEST(MfLoss, ZeroModelSingleRating) {
  MfConfig c{.dim = 3, .beta = 0, .lambda_user = 0, .lambda_item = 0};
  MfModel m(2, 2, c, 1);
  m.params()[m.user_id()].value.fill(0.0);
  m.params()[m.item_id()].value.fill(0.0);
  std::vector<Rating> r{{0, 1, 1.0}};
  EXPECT_EQ(mf_loss_value(m, r, SparseMatrix(0, 2)), 0.5);
}

TEST(MfLoss, PerfectReconstructionIsZero) {
  MfConfig c{.dim = 2, .beta = 0, .lambda_user = 0, .lambda_item = 0};
  MfModel m(2, 2, c, 1);
  m.params()[m.user_id()].value = DenseMatrix::from_rows({{1, 0}, {0, 2}});
  m.params()[m.item_id()].value = DenseMatrix::from_rows({{3, 0}, {0, 0.5}});
  std::vector<Rating> r{{0, 0, 3.0}, {1, 1, 1.0}, {0, 1, 0.0}};
  EXPECT_EQ(mf_loss_value(m, r, SparseMatrix(0, 2)), 0.0);
}

TEST(MfLoss, TermByTermOracle) {
  auto world = mf_world(7);
  const auto& d = world.dataset;
  for (auto kind : {SocialRegKind::average, SocialRegKind::individual}) {
    MfConfig c{.dim = 5, .beta = 0.3, .lambda_user = 0.02, .lambda_item = 0.07, .reg = kind};
    MfModel m(d.num_users, d.num_items, c, 3);
    auto sim = social_similarity(d.social, d.interactions);
    auto op = social_reg_operator(sim, kind);
    std::vector<Rating> ratings;
    for (const auto& p : d.interaction_list()) ratings.push_back({p.user, p.item, 1.0});
    ratings.push_back({0, 19, 0.0});
    double se = 0.0;
    for (const auto& r : ratings) {
      double dot = 0.0;
      for (std::size_t k = 0; k < 5; ++k) dot += m.user()(r.user, k) * m.item()(r.item, k);
      se += (r.value - dot) * (r.value - dot);
    }
    double uu = 0.0, vv = 0.0;
    for (double v : m.user().values()) uu += v * v;
    for (double v : m.item().values()) vv += v * v;
    const double expect = 0.5 * se + 0.15 * social_reg(m.user(), sim, kind) + 0.01 * uu + 0.035 * vv;
    EXPECT_NEAR(mf_loss_value(m, ratings, op), expect, 1e-12) << to_string(kind);

    // beta = 0 reduces to plain regularized MF.
    MfModel plain(d.num_users, d.num_items, MfConfig{.dim = 5, .beta = 0, .lambda_user = 0.02, .lambda_item = 0.07}, 3);
    EXPECT_NEAR(mf_loss_value(plain, ratings, op), 0.5 * se + 0.01 * uu + 0.035 * vv, 1e-12);
  }
}

TEST(MfFit, ZeroLearningRateLeavesParameters) {
  auto world = mf_world(2);
  auto split = split_interactions(world.dataset, 2);
  TrainingConfig tc;
  tc.learning_rate = 0.0;
  tc.max_epochs = 2;
  tc.seed = 2;
  MfConfig mc;
  auto res = mf_fit(world.dataset, split, mc, SamplerConfig{}, tc, RankingProtocol{.negatives = 30});
  MfModel fresh(world.dataset.num_users, world.dataset.num_items, mc, 2);
  EXPECT_EQ(res.model.user(), fresh.user());
  EXPECT_EQ(res.model.item(), fresh.item());
}

TEST(MfFit, LossDecreasesOverTenEpochs) {
  const auto data = synth_generate(SynthConfig{}).dataset;
  const auto split = split_interactions(data, 1);
  TrainingConfig tc;
  tc.learning_rate = 0.01;
  tc.max_epochs = 10;
  tc.patience = 10;
  for (auto kind : {SocialRegKind::average, SocialRegKind::individual}) {
    MfConfig mc;
    mc.reg = kind;
    auto res = mf_fit(data, split, mc, SamplerConfig{}, tc, RankingProtocol{.negatives = 100});
    ASSERT_EQ(res.report.epochs.size(), 10u);
    // Each epoch draws fresh negatives, so single steps may wobble.
    EXPECT_LT(res.report.epochs[9].loss, res.report.epochs[0].loss);
    EXPECT_EQ(res.report.model, "mf-" + to_string(kind));
  }
}

TEST(MfFit, GradientCheckBothRegularizers) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (auto kind : {SocialRegKind::average, SocialRegKind::individual}) {
      auto o = nemo::app::mf_gradcheck(seed, kind);
      EXPECT_LE(o.result.max_relative_error, 1e-4) << to_string(kind) << " seed " << seed;
      EXPECT_EQ(o.result.coordinates_checked, (10u + 12u) * 4u);
    }
  }
}

TEST(MfCheckpoint, RoundTripAndMismatch) {
  MfModel a(5, 6, MfConfig{.dim = 3}, 1), b(5, 6, MfConfig{.dim = 3}, 2), c(5, 7, MfConfig{.dim = 3}, 2);
  load_mf_checkpoint(decode_checkpoint(encode_checkpoint(make_mf_checkpoint(a))), b);
  EXPECT_EQ(a.user(), b.user());
  EXPECT_EQ(a.item(), b.item());
  EXPECT_THROW(load_mf_checkpoint(make_mf_checkpoint(a), c), ConfigError);
}
