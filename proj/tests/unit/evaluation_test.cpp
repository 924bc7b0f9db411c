#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "nemo/errors.hpp"
#include "nemo/evaluation.hpp"
#include "nemo/synth.hpp"

using namespace nemo;

namespace {

using Ids = std::vector<std::uint32_t>;

double ndcg_oracle(const Ids& ranked, const Ids& targets, std::size_t k) {
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t p = 0; p < std::min(k, ranked.size()); ++p)
    if (std::find(targets.begin(), targets.end(), ranked[p]) != targets.end()) dcg += 1.0 / std::log2(p + 2.0);
  for (std::size_t p = 0; p < std::min(k, targets.size()); ++p) idcg += 1.0 / std::log2(p + 2.0);
  return dcg / idcg;
}

double hr_oracle(const Ids& ranked, const Ids& targets, std::size_t k) {
  std::size_t hits = 0;
  for (auto t : targets)
    for (std::size_t p = 0; p < std::min(k, ranked.size()); ++p) hits += ranked[p] == t;
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

// Item score looked up from a fixed table, independent of the user.
Scorer table_scorer(std::vector<double> table) {
  return [table = std::move(table)](std::uint32_t, std::span<const std::uint32_t> items, std::span<double> out) {
    for (std::size_t j = 0; j < items.size(); ++j) out[j] = table[items[j]];
  };
}

}  // namespace

TEST(Rank, TopScoredTargetIsFirst) {
  Ids c{4, 7, 9, 12};
  std::vector<double> s{0.1, 5.0, 0.3, -2.0};
  EXPECT_EQ(rank_candidates(c, s).front(), 7u);
}

TEST(Rank, EqualScoresFallBackToIds) {
  Ids c{9, 2, 5, 0};
  std::vector<double> s(4, 1.0);
  EXPECT_EQ(rank_candidates(c, s), (Ids{0, 2, 5, 9}));
}

TEST(Rank, MatchesFullSortOracle) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    Ids c(200);
    std::iota(c.begin(), c.end(), 0);
    std::shuffle(c.begin(), c.end(), rng);
    std::vector<double> s(200);
    for (auto& v : s) v = static_cast<double>(rng() % 20);
    std::vector<std::size_t> idx(200);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s[a] != s[b] ? s[a] > s[b] : c[a] < c[b]; });
    Ids expect;
    for (auto k : idx) expect.push_back(c[k]);
    EXPECT_EQ(rank_candidates(c, s), expect);
  }
}

TEST(HitRatio, Examples) {
  Ids ranked{5, 1, 8, 3, 7, 2, 9};
  EXPECT_EQ(hr_at_k(ranked, Ids{2, 8}, 5), 0.5);
  EXPECT_EQ(hr_at_k(ranked, Ids{1, 3, 5}, 5), 1.0);
  EXPECT_EQ(hr_at_k(ranked, Ids{9}, 5), 0.0);
}

TEST(Ndcg, Examples) {
  EXPECT_EQ(ndcg_at_k(Ids{4, 1, 2}, Ids{4}, 10), 1.0);
  EXPECT_EQ(ndcg_at_k(Ids{4, 1, 2, 6}, Ids{2}, 3), 0.5);
  EXPECT_EQ(ndcg_at_k(Ids{4, 1, 2, 6}, Ids{6}, 3), 0.0);
}

TEST(Metrics, MatchBruteForceOracles) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 300; ++t) {
    Ids ranked(50);
    std::iota(ranked.begin(), ranked.end(), 0);
    std::shuffle(ranked.begin(), ranked.end(), rng);
    Ids targets(ranked.begin(), ranked.begin() + 1 + static_cast<std::ptrdiff_t>(rng() % 12));
    std::shuffle(ranked.begin(), ranked.end(), rng);
    std::sort(targets.begin(), targets.end());
    const std::size_t k = 1 + rng() % 25;
    EXPECT_NEAR(hr_at_k(ranked, targets, k), hr_oracle(ranked, targets, k), 1e-12);
    EXPECT_NEAR(ndcg_at_k(ranked, targets, k), ndcg_oracle(ranked, targets, k), 1e-12);
  }
}

TEST(Metrics, NdcgIsOneExactlyWhenTargetsLead) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    Ids ranked(30);
    std::iota(ranked.begin(), ranked.end(), 0);
    std::shuffle(ranked.begin(), ranked.end(), rng);
    const std::size_t n = 1 + rng() % 6, k = 1 + rng() % 8;
    const bool lead = rng() % 2;
    Ids targets;
    if (lead) {
      targets.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
      for (std::size_t j = 0; j < n; ++j) targets.push_back(ranked[rng() % 30]);
    }
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    const double v = ndcg_at_k(ranked, targets, k);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-15);
    bool top = true;
    for (std::size_t p = 0; p < std::min(k, targets.size()); ++p)
      top = top && std::binary_search(targets.begin(), targets.end(), ranked[p]);
    EXPECT_EQ(v == 1.0, top);
  }
}

TEST(Candidates, TargetsPlusSeededUnobservedDraw) {
  Ids observed{0, 3, 5, 6, 9}, targets{3, 9};
  RankingProtocol p{.negatives = 20, .seed = 4};
  auto c = build_candidates(2, targets, observed, 100, p);
  EXPECT_EQ(c.items.size(), 22u);
  EXPECT_TRUE(std::is_sorted(c.items.begin(), c.items.end()));
  for (auto i : c.items) {
    const bool is_target = i == 3 || i == 9;
    EXPECT_TRUE(is_target || !std::binary_search(observed.begin(), observed.end(), i)) << i;
  }
  EXPECT_EQ(build_candidates(2, targets, observed, 100, p).items, c.items);
  EXPECT_NE(build_candidates(3, targets, observed, 100, p).items, c.items);
}

TEST(Candidates, ShortCatalogUsesEverythingAndFlags) {
  Ids observed{1, 2}, targets{2};
  auto c = build_candidates(0, targets, observed, 6, RankingProtocol{.negatives = 1000});
  EXPECT_EQ(c.items, (Ids{0, 2, 3, 4, 5}));
  EXPECT_TRUE(c.exhausted);
}

TEST(Candidates, HeldOutItemsNeverSampledAsNegatives) {
  // Leak check: validation and test items are observed, so they can enter the
  // candidate list only as targets of the part being scored.
  auto world = synth_generate(SynthConfig{});
  const auto& d = world.dataset;
  auto split = split_interactions(d, 1);
  UserItemIndex observed(d.num_users, d.interaction_list());
  UserItemIndex test(d.num_users, split.test);
  RankingProtocol p{.negatives = 200, .seed = 1};
  for (std::uint32_t u = 0; u < d.num_users; ++u) {
    auto c = build_candidates(u, test.items(u), observed.items(u), d.num_items, p);
    for (auto i : c.items) {
      if (observed.contains(u, i)) EXPECT_TRUE(test.contains(u, i)) << "user " << u << " item " << i;
    }
  }
}

TEST(Evaluate, PerfectModelOnToy) {
  std::vector<Interaction> targets{{0, 3}, {0, 7}};
  UserItemIndex observed(1, targets);
  std::vector<double> table(50, 0.0);
  table[3] = 2.0;
  table[7] = 1.0;
  auto r = evaluate(table_scorer(table), targets, observed, 50, RankingProtocol{.negatives = 20});
  for (std::size_t j = 0; j < r.ks.size(); ++j) {
    EXPECT_EQ(r.hr[j], 1.0);
    EXPECT_EQ(r.ndcg[j], 1.0);
  }
  EXPECT_EQ(r.users_evaluated, 1u);
}

TEST(Evaluate, SkipsUsersWithoutTargetsAndIsDeterministic) {
  auto world = synth_generate(SynthConfig{.communities = 2, .users_per_community = 20, .items_per_community = 30, .seed = 3});
  const auto& d = world.dataset;
  auto split = split_interactions(d, 3);
  UserItemIndex observed(d.num_users, d.interaction_list());
  auto u = testing_util::random_dense(d.num_users, 4, 1), i = testing_util::random_dense(d.num_items, 4, 2);
  RankingProtocol p{.negatives = 30, .seed = 8};
  auto a = evaluate(inner_product_scorer(u, i), split.test, observed, d.num_items, p, "x");
  auto b = evaluate(inner_product_scorer(u, i), split.test, observed, d.num_items, p, "x");
  EXPECT_EQ(to_json(a), to_json(b));
  UserItemIndex test(d.num_users, split.test);
  std::size_t with_targets = 0;
  for (std::uint32_t x = 0; x < d.num_users; ++x) with_targets += !test.items(x).empty();
  EXPECT_EQ(a.users_evaluated, with_targets);
  for (std::size_t j = 1; j < a.ks.size(); ++j) EXPECT_GE(a.hr[j], a.hr[j - 1]);
  for (double v : a.ndcg) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Evaluate, EmptyTargetsRejected) {
  UserItemIndex observed(2, std::vector<Interaction>{{0, 1}});
  EXPECT_THROW(evaluate(table_scorer(std::vector<double>(5)), {}, observed, 5, RankingProtocol{}), ContractError);
}

TEST(Protocol, Validation) {
  EXPECT_THROW((RankingProtocol{.negatives = 0}.validate()), ConfigError);
  EXPECT_THROW((RankingProtocol{.ks = {10, 5}}.validate()), ConfigError);
  EXPECT_THROW((RankingProtocol{.ks = {0, 5}}.validate()), ConfigError);
  EXPECT_NO_THROW(RankingProtocol{}.validate());
}

TEST(Summary, MeanAndSampleStd) {
  MetricsReport a{.model = "m", .seed = 1, .ks = {5, 10}, .hr = {0.2, 0.4}, .ndcg = {0.1, 0.3}};
  MetricsReport b{.model = "m", .seed = 2, .ks = {5, 10}, .hr = {0.4, 0.6}, .ndcg = {0.3, 0.3}};
  std::vector<MetricsReport> both{a, b};
  auto s = summarize(both);
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_NEAR(s.hr_mean[0], 0.3, 1e-15);
  EXPECT_NEAR(s.hr_std[0], std::sqrt(0.02), 1e-15);
  EXPECT_EQ(s.ndcg_std[1], 0.0);
  std::vector<MetricsReport> one{a};
  EXPECT_EQ(summarize(one).hr_std, (std::vector<double>{0.0, 0.0}));
}

TEST(Serialization, TsvAndJsonShapes) {
  MetricsReport r{.model = "nemo", .seed = 3, .ks = {5, 10, 15}, .hr = {0.5, 0.75, 1}, .ndcg = {0.25, 0.3, 0.125},
                  .users_evaluated = 4};
  EXPECT_EQ(to_tsv(r), "k\thr\tndcg\n5\t0.5\t0.25\n10\t0.75\t0.3\n15\t1\t0.125\n");
  const auto j = to_json(r);
  EXPECT_EQ(j.front(), '{');
  EXPECT_NE(j.find("\"model\": \"nemo\""), std::string::npos);
  EXPECT_NE(j.find("\"users_evaluated\": 4"), std::string::npos);
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0 / 3.0), "0.3333333333333333");
}
