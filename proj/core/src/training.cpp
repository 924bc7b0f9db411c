#include "nemo/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "nemo/errors.hpp"
#include "nemo/random.hpp"

namespace nemo {

void TrainingConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("train: lr must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
}

double mse_loss(std::span<const double> scores, std::span<const double> targets) {
  if (scores.size() != targets.size()) throw DimensionError("mse_loss: scores and targets differ in length");
  double s = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) s += (targets[k] - scores[k]) * (targets[k] - scores[k]);
  return s;
}

TrainingContext make_training_context(const Dataset& dataset, const DatasetSplit& split, const ModelConfig& config) {
  TrainingContext ctx;
  ctx.dataset = &dataset;
  ctx.split = &split;
  ctx.observed = UserItemIndex(dataset.num_users, dataset.interaction_list());
  ctx.train_positives = UserItemIndex(dataset.num_users, split.train);
  ctx.social = make_social_operator(dataset.social, config.aggregation, config.self_loop);
  return ctx;
}

Representations representations_with(const TrainingContext& ctx, NemoModel& model,
                                     std::span<const Interaction> negatives) {
  const auto graph = build_bipartite(ctx.dataset->num_users, ctx.dataset->num_items, ctx.split->train, negatives);
  return compute_representations(model, *ctx.dataset, ctx.social, graph);
}

namespace {

constexpr std::uint32_t kNoFake = std::numeric_limits<std::uint32_t>::max();

struct Triple {
  std::uint32_t user;
  std::uint32_t item;  // discrete item id, unused for fakes
  std::uint32_t fake;  // index into the fake list, or kNoFake
  double target;
};

}  // namespace

EpochResult train_epoch(const TrainingContext& ctx, NemoModel& model, AdamState& adam, const SamplerConfig& sampler,
                        const TrainingConfig& config, std::size_t epoch, const BipartiteGraph& previous) {
  const Dataset& data = *ctx.dataset;
  SamplerSnapshot snapshot;
  Representations before;
  if (sampler.kind == SamplerKind::dynamic) {
    before = compute_representations(model, data, ctx.social, previous);
    snapshot.user_reps = &before.user;
    snapshot.item_reps = &before.item;
  }

  EpochResult result;
  result.negatives = assemble_negatives(ctx.observed, ctx.train_positives, data.num_items, snapshot, sampler, epoch,
                                        config.seed);
  const auto neg_pairs = result.negatives.pairs();
  const auto graph = build_bipartite(data.num_users, data.num_items, ctx.split->train, neg_pairs);
  const auto& fakes = result.negatives.fakes;

  std::vector<Triple> triples;
  triples.reserve(ctx.split->train.size() + neg_pairs.size() + fakes.size());
  for (const auto& p : ctx.split->train) triples.push_back({p.user, p.item, kNoFake, 1.0});
  for (const auto& p : neg_pairs) triples.push_back({p.user, p.item, kNoFake, 0.0});
  for (std::size_t k = 0; k < fakes.size(); ++k) {
    triples.push_back({fakes[k].user, fakes[k].anchor_item, static_cast<std::uint32_t>(k), 0.0});
  }
  Rng rng(derive_seed({config.seed, static_cast<std::uint64_t>(Stream::batch_shuffle), epoch}));
  std::shuffle(triples.begin(), triples.end(), rng);

  double norm_sum = 0.0;
  for (std::size_t start = 0; start < triples.size(); start += config.batch_size) {
    const std::size_t end = std::min(triples.size(), start + config.batch_size);
    const double scale = 1.0 / static_cast<double>(end - start);

    std::vector<std::uint32_t> users, items, fake_users;
    std::vector<double> targets, alphas;
    std::vector<FakeNegative> batch_fakes;
    for (std::size_t t = start; t < end; ++t) {
      const auto& tr = triples[t];
      if (tr.fake == kNoFake) {
        users.push_back(tr.user);
        items.push_back(tr.item);
        targets.push_back(tr.target);
      } else {
        fake_users.push_back(tr.user);
        batch_fakes.push_back(fakes[tr.fake]);
        alphas.push_back(fakes[tr.fake].alpha);
      }
    }
    // Referenced by the tape, so it must be declared first.
    const SparseMatrix pooling = pooling_matrix(batch_fakes, data.num_items);

    Tape tape;
    auto f = forward(tape, model, data, ctx.social, graph);
    std::optional<Var> loss;
    double raw = 0.0;
    if (!users.empty()) {
      Var s = row_dot(gather_rows(f.out.user, users), gather_rows(f.out.item, items));
      raw += mse_loss(s.value().values(), targets);
      loss = squared_error(s, targets, scale);
    }
    if (!batch_fakes.empty()) {
      Var source = sampler.anchor_propagated ? f.out.item : f.hidden.item;
      std::vector<std::uint32_t> anchors;
      for (const auto& fk : batch_fakes) anchors.push_back(fk.anchor_item);
      Var z = generate_fakes(tape, model.params(), model.generator, gather_rows(source, anchors),
                             spmm(pooling, source), alphas);
      for (std::size_t r = 0; r < z.rows(); ++r) {
        double n2 = 0.0;
        for (double v : z.value().row(r)) n2 += v * v;
        norm_sum += std::sqrt(n2);
      }
      Var s = row_dot(gather_rows(f.out.user, fake_users), z);
      const std::vector<double> zeros(fake_users.size(), 0.0);
      raw += mse_loss(s.value().values(), zeros);
      Var term = squared_error(s, zeros, scale);
      loss = loss ? *loss + term : term;
    }
    if (!std::isfinite(raw)) {
      throw NumericError("train_epoch: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                         std::to_string(start));
    }
    result.loss += raw;
    tape.backward(*loss);
    adam_step(model.params().all(), adam, config.learning_rate, config.weight_decay);
  }
  result.triples = triples.size();
  result.fakes = fakes.size();
  result.fake_norm = fakes.empty() ? 0.0 : norm_sum / static_cast<double>(fakes.size());
  return result;
}

MetricsReport evaluate_model(const TrainingContext& ctx, NemoModel& model, std::span<const Interaction> negatives,
                             std::span<const Interaction> targets, const RankingProtocol& protocol) {
  const auto reps = representations_with(ctx, model, negatives);
  return evaluate(inner_product_scorer(reps.user, reps.item), targets, ctx.observed, ctx.dataset->num_items, protocol,
                  "nemo");
}

namespace {

// K=10 when evaluated, otherwise the smallest K.
double stopping_metric(const MetricsReport& r) {
  auto it = std::find(r.ks.begin(), r.ks.end(), std::size_t{10});
  return it == r.ks.end() ? r.ndcg.front() : r.ndcg[static_cast<std::size_t>(it - r.ks.begin())];
}

}  // namespace

FitResult fit(const Dataset& dataset, const DatasetSplit& split, const ModelConfig& model_config,
              const SamplerConfig& sampler, const TrainingConfig& config, const RankingProtocol& protocol,
              const EpochCallback& on_epoch) {
  config.validate();
  sampler.validate();
  protocol.validate();
  const auto ctx = make_training_context(dataset, split, model_config);
  NemoModel model(model_config, dataset.num_users, dataset.num_items, dataset.user_features.cols(),
                  dataset.item_features.cols(), config.seed);
  AdamState adam;
  BipartiteGraph previous = build_bipartite(dataset.num_users, dataset.num_items, split.train, {});

  FitResult out{model, {}, {}};
  out.report.sampler = to_string(sampler.kind);
  out.report.seed = config.seed;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto er = train_epoch(ctx, model, adam, sampler, config, epoch, previous);
    if (!config.sample_dump_dir.empty()) {
      write_sample_dump(config.sample_dump_dir + "/samples-epoch-" + std::to_string(epoch) + ".tsv", er.negatives);
    }
    const auto neg_pairs = er.negatives.pairs();
    previous = build_bipartite(dataset.num_users, dataset.num_items, split.train, neg_pairs);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = er.loss;
    rec.triples = er.triples;
    rec.fakes = er.fakes;
    rec.fake_norm = er.fake_norm;
    rec.validation = evaluate_model(ctx, model, neg_pairs, split.validation, protocol);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const double metric = stopping_metric(rec.validation);
    if (metric > best) {
      best = metric;
      since_best = 0;
      out.model = model;
      out.negatives = neg_pairs;
      out.report.best_epoch = epoch;
      out.report.best_ndcg10 = metric;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return out;
}

std::string to_jsonl(const TrainReport& report) {
  std::ostringstream o;
  auto list = [](const auto& v) {
    std::string s = "[";
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (j) s += ",";
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(v[j])>>) {
        s += format_double(v[j]);
      } else {
        s += std::to_string(v[j]);
      }
    }
    return s + "]";
  };
  for (const auto& e : report.epochs) {
    o << "{\"model\":\"" << report.model << "\",\"sampler\":\"" << report.sampler << "\",\"seed\":" << report.seed
      << ",\"epoch\":" << e.epoch << ",\"loss\":" << format_double(e.loss)
      << ",\"loss_scaling\":\"sum over epoch; each step uses batch sum / batch size\""
      << ",\"triples\":" << e.triples << ",\"fakes\":" << e.fakes << ",\"fake_norm\":" << format_double(e.fake_norm)
      << ",\"k\":" << list(e.validation.ks) << ",\"val_hr\":" << list(e.validation.hr)
      << ",\"val_ndcg\":" << list(e.validation.ndcg) << ",\"seconds\":" << format_double(e.seconds)
      << ",\"best\":" << (e.epoch == report.best_epoch ? "true" : "false") << "}\n";
  }
  return o.str();
}

Checkpoint make_checkpoint(const NemoModel& model, std::span<const Interaction> negatives) {
  Checkpoint c;
  c.header = {model.num_users(), model.num_items(), model.config().dim, model.config().levels,
              model.config().prior_std};
  for (const auto& p : model.params().all()) c.blocks.emplace_back(p.name, p.value);
  DenseMatrix neg(negatives.size(), 2);
  for (std::size_t k = 0; k < negatives.size(); ++k) {
    neg(k, 0) = negatives[k].user;
    neg(k, 1) = negatives[k].item;
  }
  c.blocks.emplace_back("graph.negatives", std::move(neg));
  return c;
}

namespace {

std::string shape(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace

std::vector<Interaction> load_checkpoint(const Checkpoint& ckpt, NemoModel& model) {
  const auto& h = ckpt.header;
  if (h.num_users != model.num_users() || h.num_items != model.num_items() || h.dim != model.config().dim ||
      h.levels != model.config().levels) {
    throw ConfigError("checkpoint is for users x items x dim x levels = " + std::to_string(h.num_users) + "x" +
                      std::to_string(h.num_items) + "x" + std::to_string(h.dim) + "x" + std::to_string(h.levels) +
                      ", config expects " + std::to_string(model.num_users()) + "x" +
                      std::to_string(model.num_items()) + "x" + std::to_string(model.config().dim) + "x" +
                      std::to_string(model.config().levels));
  }
  for (auto& p : model.params().all()) {
    const DenseMatrix* block = ckpt.find(p.name);
    if (!block) throw ConfigError("checkpoint has no block '" + p.name + "'");
    if (!block->same_shape(p.value)) {
      throw ConfigError("checkpoint block '" + p.name + "' is " + shape(block->rows(), block->cols()) +
                        ", model expects " + shape(p.value.rows(), p.value.cols()));
    }
    p.value = *block;
  }
  std::vector<Interaction> negatives;
  if (const DenseMatrix* neg = ckpt.find("graph.negatives")) {
    if (neg->cols() != 2 && neg->rows() > 0) throw ConfigError("checkpoint block 'graph.negatives' must have 2 columns");
    for (std::size_t k = 0; k < neg->rows(); ++k) {
      const double u = (*neg)(k, 0), i = (*neg)(k, 1);
      if (!(u >= 0 && u < static_cast<double>(model.num_users()) && i >= 0 &&
            i < static_cast<double>(model.num_items()))) {
        throw ConfigError("checkpoint block 'graph.negatives' row " + std::to_string(k) + " is out of range");
      }
      negatives.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(i)});
    }
  }
  return negatives;
}

}  // namespace nemo
