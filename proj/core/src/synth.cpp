#include "nemo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nemo/errors.hpp"
#include "nemo/random.hpp"

namespace nemo {

namespace {

void check_probability(const char* key, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("synth: ") + key + " must lie in [0,1]");
}

void check_count(const char* key, std::size_t n) {
  if (n < 1) throw ConfigError(std::string("synth: ") + key + " must be >= 1");
}

}  // namespace

SynthConfig synth_config_from(const KeyValues& kv, bool prefixed) {
  SynthConfig c;
  const std::string prefix = prefixed ? "synth." : "";
  for (const auto& [raw_key, value] : kv) {
    std::string_view key = raw_key;
    if (prefixed) {
      if (!key.starts_with(prefix)) continue;
      key.remove_prefix(prefix.size());
    } else if (key.starts_with("synth.")) {
      key.remove_prefix(6);
    }
    if (key == "communities") c.communities = parse_uint(raw_key, value);
    else if (key == "users_per_community") c.users_per_community = parse_uint(raw_key, value);
    else if (key == "items_per_community") c.items_per_community = parse_uint(raw_key, value);
    else if (key == "social_within") c.social_within = parse_double(raw_key, value);
    else if (key == "social_cross") c.social_cross = parse_double(raw_key, value);
    else if (key == "interact_within") c.interact_within = parse_double(raw_key, value);
    else if (key == "popularity_decay") c.popularity_decay = parse_double(raw_key, value);
    else if (key == "interact_cross") c.interact_cross = parse_double(raw_key, value);
    else if (key == "feature_dim") c.feature_dim = parse_uint(raw_key, value);
    else if (key == "feature_scale") c.feature_scale = parse_double(raw_key, value);
    else if (key == "feature_noise") c.feature_noise = parse_double(raw_key, value);
    else if (key == "seed") c.seed = parse_uint(raw_key, value);
    else throw ConfigError("synth: unknown key '" + raw_key + "'");
  }
  check_count("communities", c.communities);
  check_count("users_per_community", c.users_per_community);
  check_count("items_per_community", c.items_per_community);
  check_count("feature_dim", c.feature_dim);
  check_probability("social_within", c.social_within);
  check_probability("social_cross", c.social_cross);
  check_probability("interact_within", c.interact_within);
  check_probability("popularity_decay", c.popularity_decay);
  check_probability("interact_cross", c.interact_cross);
  if (!(c.feature_scale > 0.0)) throw ConfigError("synth: feature_scale must be > 0");
  if (!(c.feature_noise >= 0.0)) throw ConfigError("synth: feature_noise must be >= 0");
  return c;
}

std::string synth_config_to_text(const SynthConfig& c) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "communities=" << c.communities << "\nusers_per_community=" << c.users_per_community
     << "\nitems_per_community=" << c.items_per_community << "\nsocial_within=" << c.social_within
     << "\nsocial_cross=" << c.social_cross << "\ninteract_within=" << c.interact_within
     << "\npopularity_decay=" << c.popularity_decay << "\ninteract_cross=" << c.interact_cross
     << "\nfeature_dim=" << c.feature_dim << "\nfeature_scale=" << c.feature_scale << "\nfeature_noise=" << c.feature_noise << "\nseed=" << c.seed << '\n';
  return ss.str();
}

SyntheticData synth_generate(const SynthConfig& c) {
  const std::size_t n = c.communities * c.users_per_community;
  const std::size_t m = c.communities * c.items_per_community;
  Rng rng(stream_seed(c.seed, Stream::synth));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticData out;
  out.user_community.resize(n);
  out.item_community.resize(m);
  for (std::size_t u = 0; u < n; ++u) out.user_community[u] = static_cast<std::uint32_t>(u / c.users_per_community);
  for (std::size_t i = 0; i < m; ++i) out.item_community[i] = static_cast<std::uint32_t>(i / c.items_per_community);

  auto features = [&](std::size_t count, std::span<const std::uint32_t> community) {
    DenseMatrix centroids(c.communities, c.feature_dim);
    for (auto& v : centroids.values()) v = normal(rng);
    DenseMatrix f(count, c.feature_dim);
    for (std::size_t r = 0; r < count; ++r) {
      for (std::size_t k = 0; k < c.feature_dim; ++k) f(r, k) = c.feature_scale * (centroids(community[r], k) + c.feature_noise * normal(rng));
    }
    return f;
  };
  DenseMatrix ufeat = features(n, out.user_community);
  DenseMatrix ifeat = features(m, out.item_community);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double p = out.user_community[a] == out.user_community[b] ? c.social_within : c.social_cross;
      if (unit(rng) < p) edges.emplace_back(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
    }
  }

  // popularity_rank[i]: position of item i in its block's popularity order.
  std::vector<std::size_t> popularity_rank(m);
  for (std::size_t block = 0; block < c.communities; ++block) {
    std::vector<std::size_t> order(c.items_per_community);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < order.size(); ++k) popularity_rank[block * c.items_per_community + order[k]] = k;
  }
  std::vector<double> block_prob(m);
  for (std::size_t i = 0; i < m; ++i) {
    block_prob[i] = c.interact_within * std::pow(c.popularity_decay, static_cast<double>(popularity_rank[i]));
  }

  std::vector<Interaction> pairs;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t i = 0; i < m; ++i) {
      const double p = out.user_community[u] == out.item_community[i] ? block_prob[i] : c.interact_cross;
      if (unit(rng) < p) pairs.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(i)});
    }
  }

  out.dataset = make_dataset(std::move(ufeat), std::move(ifeat), pairs, edges);
  return out;
}

double interaction_assortativity(const SparseMatrix& interactions, std::span<const std::uint32_t> user_community,
                                 std::span<const std::uint32_t> item_community, std::size_t communities) {
  DenseMatrix e(communities, communities);
  double total = 0.0;
  for (const auto& t : interactions.triplets()) {
    e(user_community[t.row], item_community[t.col]) += t.value;
    total += t.value;
  }
  if (total == 0.0) return 0.0;
  double trace = 0.0, ab = 0.0;
  for (std::size_t c = 0; c < communities; ++c) {
    trace += e(c, c) / total;
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < communities; ++k) {
      a += e(c, k) / total;
      b += e(k, c) / total;
    }
    ab += a * b;
  }
  if (ab >= 1.0) return 1.0;
  return (trace - ab) / (1.0 - ab);
}

}  // namespace nemo
