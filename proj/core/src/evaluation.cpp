#include "nemo/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nemo/errors.hpp"
#include "nemo/random.hpp"
#include "nemo/sampling.hpp"

namespace nemo {

void RankingProtocol::validate() const {
  if (negatives < 1) throw ConfigError("eval: negatives must be >= 1");
  if (ks.empty()) throw ConfigError("eval: K list is empty");
  for (std::size_t j = 0; j < ks.size(); ++j) {
    if (ks[j] < 1 || (j > 0 && ks[j] <= ks[j - 1])) throw ConfigError("eval: K values must be positive and ascending");
  }
}

CandidateSet build_candidates(std::uint32_t user, std::span<const std::uint32_t> targets,
                              std::span<const std::uint32_t> observed, std::size_t num_items,
                              const RankingProtocol& protocol) {
  Rng rng(derive_seed({protocol.seed, static_cast<std::uint64_t>(Stream::eval_negatives), user}));
  auto draw = uniform_sample(observed, num_items, protocol.negatives, rng);
  CandidateSet c;
  c.exhausted = draw.exhausted;
  c.items = std::move(draw.items);
  c.items.insert(c.items.end(), targets.begin(), targets.end());
  std::sort(c.items.begin(), c.items.end());
  c.items.erase(std::unique(c.items.begin(), c.items.end()), c.items.end());
  return c;
}

std::vector<std::uint32_t> rank_candidates(std::span<const std::uint32_t> candidates, std::span<const double> scores) {
  if (candidates.size() != scores.size()) throw DimensionError("rank_candidates: score count differs from candidates");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });
  std::vector<std::uint32_t> out;
  out.reserve(order.size());
  for (auto j : order) out.push_back(candidates[j]);
  return out;
}

double hr_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> targets, std::size_t k) {
  if (k < 1) throw ContractError("hr_at_k: K must be >= 1");
  if (targets.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t p = 0; p < std::min(k, ranked.size()); ++p) {
    if (std::binary_search(targets.begin(), targets.end(), ranked[p])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double ndcg_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> targets, std::size_t k) {
  if (k < 1) throw ContractError("ndcg_at_k: K must be >= 1");
  if (targets.empty()) return 0.0;
  double dcg = 0.0;
  for (std::size_t p = 0; p < std::min(k, ranked.size()); ++p) {
    if (std::binary_search(targets.begin(), targets.end(), ranked[p])) dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  }
  double idcg = 0.0;
  for (std::size_t p = 0; p < std::min(k, targets.size()); ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return dcg / idcg;
}

Scorer inner_product_scorer(const DenseMatrix& user_reps, const DenseMatrix& item_reps) {
  if (user_reps.cols() != item_reps.cols()) throw DimensionError("inner_product_scorer: representation widths differ");
  return [&user_reps, &item_reps](std::uint32_t user, std::span<const std::uint32_t> items, std::span<double> scores) {
    auto u = user_reps.row(user);
    for (std::size_t j = 0; j < items.size(); ++j) {
      auto v = item_reps.row(items[j]);
      double s = 0.0;
      for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
      scores[j] = s;
    }
  };
}

namespace {

std::size_t index_of_k(const std::vector<std::size_t>& ks, std::size_t k) {
  auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw ContractError("metrics: K=" + std::to_string(k) + " was not evaluated");
  return static_cast<std::size_t>(it - ks.begin());
}

}  // namespace

double MetricsReport::ndcg_at(std::size_t k) const { return ndcg[index_of_k(ks, k)]; }
double MetricsReport::hr_at(std::size_t k) const { return hr[index_of_k(ks, k)]; }

MetricsReport evaluate(const Scorer& scorer, std::span<const Interaction> targets, const UserItemIndex& observed,
                       std::size_t num_items, const RankingProtocol& protocol, const std::string& model) {
  protocol.validate();
  if (targets.empty()) throw ContractError("evaluate: no target interactions");
  const UserItemIndex by_user(observed.num_users(), targets);

  MetricsReport r;
  r.model = model;
  r.seed = protocol.seed;
  r.ks = protocol.ks;
  r.hr.assign(r.ks.size(), 0.0);
  r.ndcg.assign(r.ks.size(), 0.0);
  std::vector<double> scores;
  for (std::size_t u = 0; u < by_user.num_users(); ++u) {
    auto t = by_user.items(u);
    if (t.empty()) continue;
    const auto user = static_cast<std::uint32_t>(u);
    const auto cand = build_candidates(user, t, observed.items(u), num_items, protocol);
    scores.assign(cand.items.size(), 0.0);
    scorer(user, cand.items, scores);
    const auto ranked = rank_candidates(cand.items, scores);
    for (std::size_t j = 0; j < r.ks.size(); ++j) {
      r.hr[j] += hr_at_k(ranked, t, r.ks[j]);
      r.ndcg[j] += ndcg_at_k(ranked, t, r.ks[j]);
    }
    ++r.users_evaluated;
    r.users_exhausted += cand.exhausted ? 1 : 0;
  }
  for (std::size_t j = 0; j < r.ks.size(); ++j) {
    r.hr[j] /= static_cast<double>(r.users_evaluated);
    r.ndcg[j] /= static_cast<double>(r.users_evaluated);
  }
  return r;
}

MetricsSummary summarize(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw ContractError("summarize: no reports");
  MetricsSummary s;
  s.model = reports.front().model;
  s.ks = reports.front().ks;
  const auto n = static_cast<double>(reports.size());
  auto stats = [&](auto field, std::vector<double>& mean, std::vector<double>& sd) {
    mean.assign(s.ks.size(), 0.0);
    sd.assign(s.ks.size(), 0.0);
    for (std::size_t j = 0; j < s.ks.size(); ++j) {
      for (const auto& r : reports) mean[j] += (r.*field)[j];
      mean[j] /= n;
      if (reports.size() > 1) {
        double ss = 0.0;
        for (const auto& r : reports) ss += ((r.*field)[j] - mean[j]) * ((r.*field)[j] - mean[j]);
        sd[j] = std::sqrt(ss / (n - 1.0));
      }
    }
  };
  for (const auto& r : reports) {
    if (r.ks != s.ks) throw ContractError("summarize: reports use different K lists");
    s.seeds.push_back(r.seed);
  }
  stats(&MetricsReport::hr, s.hr_mean, s.hr_std);
  stats(&MetricsReport::ndcg, s.ndcg_mean, s.ndcg_std);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

template <class T, class F>
std::string json_array(const std::vector<T>& v, F fmt) {
  std::string out = "[";
  for (std::size_t j = 0; j < v.size(); ++j) out += (j ? ", " : "") + fmt(v[j]);
  return out + "]";
}

std::string num(double v) { return format_double(v); }
std::string count(std::uint64_t v) { return std::to_string(v); }

}  // namespace

// Written by hand so the byte layout stays fixed across library versions.
std::string to_json(const MetricsReport& r) {
  std::ostringstream o;
  o << "{\n"
    << "  \"model\": " << json_string(r.model) << ",\n"
    << "  \"seed\": " << r.seed << ",\n"
    << "  \"users_evaluated\": " << r.users_evaluated << ",\n"
    << "  \"users_exhausted\": " << r.users_exhausted << ",\n"
    << "  \"k\": " << json_array(r.ks, count) << ",\n"
    << "  \"hr\": " << json_array(r.hr, num) << ",\n"
    << "  \"ndcg\": " << json_array(r.ndcg, num) << "\n"
    << "}\n";
  return o.str();
}

std::string to_json(const MetricsSummary& s) {
  std::ostringstream o;
  o << "{\n"
    << "  \"model\": " << json_string(s.model) << ",\n"
    << "  \"seeds\": " << json_array(s.seeds, count) << ",\n"
    << "  \"k\": " << json_array(s.ks, count) << ",\n"
    << "  \"hr_mean\": " << json_array(s.hr_mean, num) << ",\n"
    << "  \"hr_std\": " << json_array(s.hr_std, num) << ",\n"
    << "  \"ndcg_mean\": " << json_array(s.ndcg_mean, num) << ",\n"
    << "  \"ndcg_std\": " << json_array(s.ndcg_std, num) << "\n"
    << "}\n";
  return o.str();
}

std::string to_tsv(const MetricsReport& r) {
  std::string out = "k\thr\tndcg\n";
  for (std::size_t j = 0; j < r.ks.size(); ++j) {
    out += std::to_string(r.ks[j]) + '\t' + num(r.hr[j]) + '\t' + num(r.ndcg[j]) + '\n';
  }
  return out;
}

std::string to_tsv(const MetricsSummary& s) {
  std::string out = "k\thr_mean\thr_std\tndcg_mean\tndcg_std\n";
  for (std::size_t j = 0; j < s.ks.size(); ++j) {
    out += std::to_string(s.ks[j]) + '\t' + num(s.hr_mean[j]) + '\t' + num(s.hr_std[j]) + '\t' + num(s.ndcg_mean[j]) +
           '\t' + num(s.ndcg_std[j]) + '\n';
  }
  return out;
}

}  // namespace nemo
