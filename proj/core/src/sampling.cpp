#include "nemo/sampling.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "nemo/errors.hpp"

namespace nemo {

SamplerKind parse_sampler_kind(std::string_view s) {
  if (s == "fixed") return SamplerKind::fixed;
  if (s == "static") return SamplerKind::resample;
  if (s == "dynamic") return SamplerKind::dynamic;
  if (s == "generative") return SamplerKind::generative;
  throw ConfigError("unknown sampler '" + std::string(s) + "' (fixed|static|dynamic|generative)");
}

std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::fixed: return "fixed";
    case SamplerKind::resample: return "static";
    case SamplerKind::dynamic: return "dynamic";
    case SamplerKind::generative: return "generative";
  }
  return "?";
}

void SamplerConfig::validate() const {
  if (negatives_per_user < 1) throw ConfigError("sampler: n_neg must be >= 1");
  if (pool_size < 1) throw ConfigError("sampler: pool_size must be >= 1");
  if (!(beta > 0.0)) throw ConfigError("sampler: beta must be > 0");
  if (dynamic_multiplier < 1) throw ConfigError("sampler: dynamic_multiplier must be >= 1");
}

UniformDraw uniform_sample(std::span<const std::uint32_t> observed, std::size_t num_items, std::size_t n, Rng& rng) {
  const std::size_t available = num_items - std::min(num_items, observed.size());
  UniformDraw out;
  auto unobserved = [&] {
    std::vector<std::uint32_t> free;
    free.reserve(available);
    std::size_t k = 0;
    for (std::uint32_t i = 0; i < num_items; ++i) {
      while (k < observed.size() && observed[k] < i) ++k;
      if (k < observed.size() && observed[k] == i) continue;
      free.push_back(i);
    }
    return free;
  };

  if (n >= available) {
    out.items = unobserved();
    out.exhausted = n > available;
    return out;
  }
  if (4 * n >= available) {
    // Dense regime: partial Fisher-Yates over the unobserved list.
    auto free = unobserved();
    for (std::size_t k = 0; k < n; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, free.size() - 1);
      std::swap(free[k], free[pick(rng)]);
    }
    free.resize(n);
    std::sort(free.begin(), free.end());
    out.items = std::move(free);
    return out;
  }
  // Sparse regime: rejection sampling.
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(num_items - 1));
  std::vector<std::uint32_t> chosen;
  chosen.reserve(n);
  while (chosen.size() < n) {
    const auto i = pick(rng);
    if (std::binary_search(observed.begin(), observed.end(), i)) continue;
    if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
    chosen.push_back(i);
  }
  std::sort(chosen.begin(), chosen.end());
  out.items = std::move(chosen);
  return out;
}

std::vector<Interaction> NegativeSampleSet::pairs() const {
  std::vector<Interaction> out;
  for (std::size_t u = 0; u < items.size(); ++u) {
    for (auto i : items[u]) out.push_back({static_cast<std::uint32_t>(u), i});
  }
  return out;
}

std::size_t NegativeSampleSet::discrete_count() const {
  std::size_t n = 0;
  for (const auto& v : items) n += v.size();
  return n;
}

NegativeSampleSet static_resample(const UserItemIndex& observed, std::size_t num_items, const SamplerConfig& config,
                                  std::size_t epoch, std::uint64_t seed) {
  const std::size_t draw_epoch = config.kind == SamplerKind::fixed ? 0 : epoch;
  NegativeSampleSet set;
  set.epoch = epoch;
  set.items.resize(observed.num_users());
  for (std::size_t u = 0; u < observed.num_users(); ++u) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(Stream::negatives), draw_epoch, u}));
    auto draw = uniform_sample(observed.items(u), num_items, config.negatives_per_user, rng);
    set.items[u] = std::move(draw.items);
    set.users_exhausted += draw.exhausted ? 1 : 0;
  }
  return set;
}

std::vector<std::uint32_t> select_hard_negatives(std::span<const ScoredItem> candidates, std::size_t n) {
  std::vector<ScoredItem> sorted(candidates.begin(), candidates.end());
  const auto better = [](const ScoredItem& a, const ScoredItem& b) {
    return a.score != b.score ? a.score > b.score : a.item < b.item;
  };
  const auto k = std::min(n, sorted.size());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(), better);
  std::vector<std::uint32_t> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) out.push_back(sorted[j].item);
  std::sort(out.begin(), out.end());
  return out;
}

NegativeSampleSet dynamic_resample(const UserItemIndex& observed, const DenseMatrix& user_reps,
                                   const DenseMatrix& item_reps, const SamplerConfig& config, std::size_t epoch,
                                   std::uint64_t seed) {
  if (user_reps.rows() != observed.num_users() || user_reps.cols() != item_reps.cols()) {
    throw DimensionError("dynamic_resample: representation shapes do not match the index");
  }
  NegativeSampleSet set;
  set.epoch = epoch;
  set.items.resize(observed.num_users());
  const std::size_t pool_n = config.dynamic_multiplier * config.negatives_per_user;
  for (std::size_t u = 0; u < observed.num_users(); ++u) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(Stream::dynamic_pool), epoch, u}));
    auto draw = uniform_sample(observed.items(u), item_reps.rows(), pool_n, rng);
    std::vector<ScoredItem> scored;
    scored.reserve(draw.items.size());
    auto urow = user_reps.row(u);
    for (auto i : draw.items) {
      auto irow = item_reps.row(i);
      double s = 0.0;
      for (std::size_t k = 0; k < urow.size(); ++k) s += urow[k] * irow[k];
      scored.push_back({i, s});
    }
    set.items[u] = select_hard_negatives(scored, config.negatives_per_user);
    set.users_exhausted += set.items[u].size() < config.negatives_per_user ? 1 : 0;
  }
  return set;
}

double sample_alpha(double b, Rng& rng) {
  if (!(b > 0.0)) throw ContractError("sample_alpha: b must be > 0");
  std::gamma_distribution<double> gamma(b, 1.0);
  const double x = gamma(rng);
  const double y = gamma(rng);
  if (x + y == 0.0) return 0.5;
  return x / (x + y);
}

std::vector<double> pool(std::span<const std::vector<double>> embeddings) {
  if (embeddings.empty()) throw ContractError("pool: empty list");
  std::vector<double> out(embeddings.front().size(), 0.0);
  for (const auto& e : embeddings) {
    if (e.size() != out.size()) throw DimensionError("pool: embeddings differ in width");
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += e[k];
  }
  for (auto& v : out) v /= static_cast<double>(embeddings.size());
  return out;
}

std::vector<double> generate_fake(std::span<const double> z, std::span<const double> pooled, double alpha,
                                  const ParameterSet& params, const Generator& generator) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("generate_fake: alpha outside [0,1]");
  if (z.size() != pooled.size()) throw DimensionError("generate_fake: z and pooled differ in width");
  DenseMatrix zm(1, z.size(), std::vector<double>(z.begin(), z.end()));
  const DenseMatrix gz = generator_apply(params, generator, zm);
  std::vector<double> out(z.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = alpha * gz(0, k) + (1.0 - alpha) * pooled[k];
  return out;
}

Var generate_fakes(Tape& tape, ParameterSet& params, const Generator& generator, Var anchors, Var pooled,
                   const std::vector<double>& alphas) {
  std::vector<double> complement(alphas.size());
  for (std::size_t k = 0; k < alphas.size(); ++k) complement[k] = 1.0 - alphas[k];
  Var g = generator_forward(tape, params, generator, anchors);
  return scale_rows(g, alphas) + scale_rows(pooled, std::move(complement));
}

SparseMatrix pooling_matrix(std::span<const FakeNegative> fakes, std::size_t num_items) {
  std::vector<Triplet> t;
  for (std::size_t k = 0; k < fakes.size(); ++k) {
    const auto& pool_items = fakes[k].pool_items;
    if (pool_items.empty()) throw ContractError("pooling_matrix: fake negative with an empty pool");
    const double w = 1.0 / static_cast<double>(pool_items.size());
    for (auto i : pool_items) t.push_back({static_cast<std::uint32_t>(k), i, w});
  }
  return SparseMatrix::from_triplets(fakes.size(), num_items, std::move(t));
}

NegativeSampleSet assemble_negatives(const UserItemIndex& observed, const UserItemIndex& train_positives,
                                     std::size_t num_items, const SamplerSnapshot& snapshot,
                                     const SamplerConfig& config, std::size_t epoch, std::uint64_t seed) {
  config.validate();
  NegativeSampleSet set;
  if (config.kind == SamplerKind::dynamic) {
    if (!snapshot.user_reps || !snapshot.item_reps) throw ContractError("assemble_negatives: dynamic kind needs a snapshot");
    set = dynamic_resample(observed, *snapshot.user_reps, *snapshot.item_reps, config, epoch, seed);
  } else {
    set = static_resample(observed, num_items, config, epoch, seed);
  }
  if (config.kind != SamplerKind::generative) return set;

  for (std::size_t u = 0; u < train_positives.num_users(); ++u) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(Stream::generative_pool), epoch, u}));
    for (auto anchor : train_positives.items(u)) {
      auto draw = uniform_sample(observed.items(u), num_items, config.pool_size, rng);
      if (draw.items.empty()) continue;
      const double alpha = sample_alpha(config.beta, rng);
      set.fakes.push_back({static_cast<std::uint32_t>(u), anchor, std::move(draw.items), alpha});
    }
  }

  if (snapshot.item_reps && snapshot.params && snapshot.generator && !set.fakes.empty()) {
    const DenseMatrix& items = *snapshot.item_reps;
    set.fake_embeddings = DenseMatrix(set.fakes.size(), items.cols());
    for (std::size_t k = 0; k < set.fakes.size(); ++k) {
      const auto& f = set.fakes[k];
      std::vector<std::vector<double>> rows;
      for (auto i : f.pool_items) rows.emplace_back(items.row(i).begin(), items.row(i).end());
      const auto pooled = pool(rows);
      const auto z = generate_fake(items.row(f.anchor_item), pooled, f.alpha, *snapshot.params, *snapshot.generator);
      std::copy(z.begin(), z.end(), set.fake_embeddings.row(k).begin());
    }
  }
  return set;
}

void write_sample_dump(const std::string& path, const NegativeSampleSet& set) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write sample dump " + path);
  for (const auto& p : set.pairs()) out << p.user << '\t' << p.item << '\n';
  std::map<std::uint32_t, std::size_t> counts;
  for (const auto& f : set.fakes) ++counts[f.user];
  for (std::size_t u = 0; u < set.items.size(); ++u) {
    const auto it = counts.find(static_cast<std::uint32_t>(u));
    out << u << "\tfakes=" << (it == counts.end() ? 0 : it->second) << '\n';
  }
}

}  // namespace nemo
