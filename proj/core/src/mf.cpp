#include "nemo/mf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "nemo/errors.hpp"
#include "nemo/kernels.hpp"
#include "nemo/random.hpp"

namespace nemo {

SocialRegKind parse_social_reg_kind(std::string_view s) {
  if (s == "average") return SocialRegKind::average;
  if (s == "individual") return SocialRegKind::individual;
  throw ConfigError("unknown regularizer '" + std::string(s) + "' (average|individual)");
}

std::string to_string(SocialRegKind k) { return k == SocialRegKind::average ? "average" : "individual"; }

void MfConfig::validate() const {
  if (dim < 1) throw ConfigError("mf: dim must be >= 1");
  if (!(beta >= 0.0 && lambda_user >= 0.0 && lambda_item >= 0.0)) throw ConfigError("mf: coefficients must be >= 0");
}

double cosine_similarity(const SparseMatrix& ratings, std::size_t i, std::size_t j) {
  auto ci = ratings.row_cols(i), cj = ratings.row_cols(j);
  auto vi = ratings.row_values(i), vj = ratings.row_values(j);
  if (ci.empty() || cj.empty()) return 0.0;
  double dot = 0.0, ni = 0.0, nj = 0.0;
  for (double v : vi) ni += v * v;
  for (double v : vj) nj += v * v;
  std::size_t a = 0, b = 0;
  while (a < ci.size() && b < cj.size()) {
    if (ci[a] < cj[b]) {
      ++a;
    } else if (cj[b] < ci[a]) {
      ++b;
    } else {
      dot += vi[a++] * vj[b++];
    }
  }
  return dot / std::sqrt(ni * nj);
}

SparseMatrix social_similarity(const SparseMatrix& social, const SparseMatrix& ratings) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < social.rows(); ++i) {
    for (auto j : social.row_cols(i)) {
      const double s = cosine_similarity(ratings, i, j);
      if (s != 0.0) t.push_back({static_cast<std::uint32_t>(i), j, s});
    }
  }
  return SparseMatrix::from_triplets(social.rows(), social.cols(), std::move(t));
}

SparseMatrix social_reg_operator(const SparseMatrix& similarity, SocialRegKind kind) {
  const std::size_t n = similarity.rows();
  std::vector<Triplet> t;
  if (kind == SocialRegKind::average) {
    for (std::size_t i = 0; i < n; ++i) {
      double mass = 0.0;
      for (double s : similarity.row_values(i)) mass += std::max(s, 0.0);
      if (mass <= 0.0) continue;
      const auto row = static_cast<std::uint32_t>(i);
      t.push_back({row, row, 1.0});
      auto cols = similarity.row_cols(i);
      auto vals = similarity.row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k) t.push_back({row, cols[k], -vals[k] / mass});
    }
    return SparseMatrix::from_triplets(n, n, std::move(t));
  }
  std::uint32_t e = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto cols = similarity.row_cols(i);
    auto vals = similarity.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (vals[k] < 0.0) throw ContractError("social_reg_operator: individual weights must be non-negative");
      if (cols[k] == i) continue;
      const double w = std::sqrt(vals[k]);
      t.push_back({e, static_cast<std::uint32_t>(i), w});
      t.push_back({e, cols[k], -w});
      ++e;
    }
  }
  return SparseMatrix::from_triplets(e, n, std::move(t));
}

double social_reg(const DenseMatrix& user, const SparseMatrix& similarity, SocialRegKind kind) {
  const auto op = social_reg_operator(similarity, kind);
  const auto img = spmm(op, user);
  double s = 0.0;
  for (double v : img.values()) s += v * v;
  return s;
}

MfModel::MfModel(std::size_t num_users, std::size_t num_items, const MfConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  Rng rng(derive_seed({seed, static_cast<std::uint64_t>(Stream::prior_init), 0x6D66}));
  std::normal_distribution<double> dist(0.0, 0.1);
  DenseMatrix u(num_users, config_.dim), v(num_items, config_.dim);
  for (auto& x : u.values()) x = dist(rng);
  for (auto& x : v.values()) x = dist(rng);
  user_ = params_.add("mf.user", std::move(u));
  item_ = params_.add("mf.item", std::move(v));
}

Var mf_loss(Tape& tape, MfModel& model, std::span<const Rating> ratings, const SparseMatrix& reg_operator,
            double penalty_weight) {
  const auto& cfg = model.config();
  Var u = tape.parameter(model.params()[model.user_id()]);
  Var v = tape.parameter(model.params()[model.item_id()]);
  std::vector<std::uint32_t> users, items;
  std::vector<double> targets;
  for (const auto& r : ratings) {
    users.push_back(r.user);
    items.push_back(r.item);
    targets.push_back(r.value);
  }
  Var loss = squared_error(row_dot(gather_rows(u, users), gather_rows(v, items)), targets, 0.5);
  const double w = penalty_weight;
  if (cfg.beta > 0.0 && reg_operator.nnz() > 0) loss = loss + (0.5 * cfg.beta * w) * sum_squares(spmm(reg_operator, u));
  if (cfg.lambda_user > 0.0) loss = loss + (0.5 * cfg.lambda_user * w) * sum_squares(u);
  if (cfg.lambda_item > 0.0) loss = loss + (0.5 * cfg.lambda_item * w) * sum_squares(v);
  return loss;
}

double mf_loss_value(MfModel& model, std::span<const Rating> ratings, const SparseMatrix& reg_operator) {
  Tape tape;
  return mf_loss(tape, model, ratings, reg_operator).value()(0, 0);
}

MetricsReport evaluate_mf(const MfModel& model, std::span<const Interaction> targets, const UserItemIndex& observed,
                          const RankingProtocol& protocol) {
  return evaluate(inner_product_scorer(model.user(), model.item()), targets, observed, model.item().rows(), protocol,
                  "mf-" + to_string(model.config().reg));
}

MfFitResult mf_fit(const Dataset& dataset, const DatasetSplit& split, const MfConfig& mf, const SamplerConfig& sampler,
                   const TrainingConfig& config, const RankingProtocol& protocol, const EpochCallback& on_epoch) {
  config.validate();
  protocol.validate();
  MfModel model(dataset.num_users, dataset.num_items, mf, config.seed);
  const UserItemIndex observed(dataset.num_users, dataset.interaction_list());
  // Similarity uses training interactions only, so held-out items do not leak.
  const auto train_r = make_dataset(DenseMatrix(dataset.num_users, 1), DenseMatrix(dataset.num_items, 1), split.train,
                                    {}).interactions;
  const auto reg_op = social_reg_operator(social_similarity(dataset.social, train_r), mf.reg);

  SamplerConfig draw = sampler;
  draw.kind = SamplerKind::resample;
  AdamState adam;
  MfFitResult out{model, {}};
  out.report.model = "mf-" + to_string(mf.reg);
  out.report.sampler = "static";
  out.report.seed = config.seed;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto negs = static_resample(observed, dataset.num_items, draw, epoch, config.seed);
    std::vector<Rating> ratings;
    for (const auto& p : split.train) ratings.push_back({p.user, p.item, 1.0});
    for (const auto& p : negs.pairs()) ratings.push_back({p.user, p.item, 0.0});
    Rng rng(derive_seed({config.seed, static_cast<std::uint64_t>(Stream::batch_shuffle), epoch}));
    std::shuffle(ratings.begin(), ratings.end(), rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < ratings.size(); start += config.batch_size) {
      const std::size_t end = std::min(ratings.size(), start + config.batch_size);
      const std::span<const Rating> batch(ratings.data() + start, end - start);
      Tape tape;
      Var loss = mf_loss(tape, model, batch, reg_op,
                         static_cast<double>(batch.size()) / static_cast<double>(ratings.size()));
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) throw NumericError("mf_fit: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += value;
      tape.backward(loss);
      adam_step(model.params().all(), adam, config.learning_rate, 0.0);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = epoch_loss;
    rec.triples = ratings.size();
    rec.validation = evaluate_mf(model, split.validation, observed, protocol);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const auto& ks = rec.validation.ks;
    auto it = std::find(ks.begin(), ks.end(), std::size_t{10});
    const double metric = it == ks.end() ? rec.validation.ndcg.front()
                                         : rec.validation.ndcg[static_cast<std::size_t>(it - ks.begin())];
    if (metric > best) {
      best = metric;
      since_best = 0;
      out.model = model;
      out.report.best_epoch = epoch;
      out.report.best_ndcg10 = metric;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return out;
}

Checkpoint make_mf_checkpoint(const MfModel& model) {
  Checkpoint c;
  c.header = {model.user().rows(), model.item().rows(), model.config().dim, 0, 0.0};
  for (const auto& p : model.params().all()) c.blocks.emplace_back(p.name, p.value);
  return c;
}

void load_mf_checkpoint(const Checkpoint& ckpt, MfModel& model) {
  for (auto& p : model.params().all()) {
    const DenseMatrix* block = ckpt.find(p.name);
    if (!block) throw ConfigError("checkpoint has no block '" + p.name + "'");
    if (!block->same_shape(p.value)) {
      throw ConfigError("checkpoint block '" + p.name + "' is " + std::to_string(block->rows()) + "x" +
                        std::to_string(block->cols()) + ", model expects " + std::to_string(p.value.rows()) + "x" +
                        std::to_string(p.value.cols()));
    }
    p.value = *block;
  }
}

}  // namespace nemo
