#include "nemo/model.hpp"

#include <cmath>

#include "nemo/errors.hpp"
#include "nemo/kernels.hpp"
#include "nemo/random.hpp"

namespace nemo {

PriorKind parse_prior_kind(std::string_view s) {
  if (s == "gaussian") return PriorKind::gaussian;
  if (s == "uniform") return PriorKind::uniform;
  if (s == "none") return PriorKind::none;
  throw ConfigError("unknown prior kind '" + std::string(s) + "' (gaussian|uniform|none)");
}

AggregationKind parse_aggregation_kind(std::string_view s) {
  if (s == "plain") return AggregationKind::plain;
  if (s == "gcn") return AggregationKind::gcn;
  throw ConfigError("unknown aggregation kind '" + std::string(s) + "' (plain|gcn)");
}

std::string to_string(PriorKind k) {
  switch (k) {
    case PriorKind::gaussian: return "gaussian";
    case PriorKind::uniform: return "uniform";
    case PriorKind::none: return "none";
  }
  return "?";
}

std::string to_string(AggregationKind k) { return k == AggregationKind::plain ? "plain" : "gcn"; }

void ModelConfig::validate() const {
  if (dim < 1) throw ConfigError("model: dim must be >= 1");
  if (!(prior_std > 0.0)) throw ConfigError("model: prior_std must be > 0");
  if (projection_layers < 1 || propagation_layers < 1) throw ConfigError("model: MLP depths must be >= 1");
}

PriorEmbeddings init_priors(std::size_t num_users, std::size_t num_items, std::size_t dim, double std,
                            std::uint64_t seed, PriorKind kind) {
  if (!(std > 0.0)) throw ContractError("init_priors: std must be > 0");
  Rng rng(stream_seed(seed, Stream::prior_init));
  PriorEmbeddings p{DenseMatrix(num_users, dim), DenseMatrix(num_items, dim)};
  if (kind == PriorKind::uniform) {
    const double half = std * std::sqrt(3.0);
    std::uniform_real_distribution<double> dist(-half, half);
    for (auto& v : p.user.values()) v = dist(rng);
    for (auto& v : p.item.values()) v = dist(rng);
  } else {
    std::normal_distribution<double> dist(0.0, std);
    for (auto& v : p.user.values()) v = dist(rng);
    for (auto& v : p.item.values()) v = dist(rng);
  }
  return p;
}

Generator make_generator(ParameterSet& params, std::size_t dim, std::uint64_t seed) {
  const std::vector<std::size_t> widths{dim, dim, dim};
  return Generator{make_mlp(params, "gen", widths, Activation::sigmoid, Activation::sigmoid, seed)};
}

namespace {

std::vector<std::size_t> widths_for(std::size_t in, std::size_t dim, std::size_t layers) {
  std::vector<std::size_t> w{in};
  for (std::size_t k = 0; k < layers; ++k) w.push_back(dim);
  return w;
}

std::uint64_t mlp_seed(std::uint64_t seed, std::uint64_t which) {
  return derive_seed({seed, static_cast<std::uint64_t>(Stream::mlp_init), which});
}

}  // namespace

NemoModel::NemoModel(const ModelConfig& config, std::size_t num_users, std::size_t num_items,
                     std::size_t user_feature_dim, std::size_t item_feature_dim, std::uint64_t seed)
    : config_(config), num_users_(num_users), num_items_(num_items) {
  config_.validate();
  const auto d = config_.dim;
  user_projection = make_mlp(params_, "proj.user", widths_for(user_feature_dim, d, config_.projection_layers),
                             Activation::sigmoid, Activation::none, mlp_seed(seed, 1));
  item_projection = make_mlp(params_, "proj.item", widths_for(item_feature_dim, d, config_.projection_layers),
                             Activation::sigmoid, Activation::none, mlp_seed(seed, 2));
  positive_propagation = make_mlp(params_, "prop.pos", widths_for(d, d, config_.propagation_layers),
                                  Activation::sigmoid, Activation::sigmoid, mlp_seed(seed, 3));
  negative_propagation = make_mlp(params_, "prop.neg", widths_for(d, d, config_.propagation_layers),
                                  Activation::sigmoid, Activation::sigmoid, mlp_seed(seed, 4));
  if (config_.prior != PriorKind::none) {
    auto priors = init_priors(num_users, num_items, d, config_.prior_std, seed, config_.prior);
    user_prior = params_.add("prior.user", std::move(priors.user));
    item_prior = params_.add("prior.item", std::move(priors.item));
  }
  generator = make_generator(params_, d, mlp_seed(seed, 5));
}

SocialOperator make_social_operator(const SparseMatrix& adjacency, AggregationKind kind, bool self_loop) {
  if (kind == AggregationKind::plain) return SocialOperator{adjacency, self_loop};
  const std::size_t n = adjacency.rows();
  std::vector<double> deg = adjacency.row_sums();
  std::vector<Triplet> t = adjacency.triplets();
  for (std::size_t u = 0; u < n; ++u) t.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(u), 1.0});
  for (auto& e : t) e.value /= std::sqrt((deg[e.row] + 1.0) * (deg[e.col] + 1.0));
  return SocialOperator{SparseMatrix::from_triplets(n, n, std::move(t)), false};
}

HiddenVars hidden_reps(Tape& tape, NemoModel& model, Var user_features, Var item_features) {
  auto& params = model.params();
  Var h1 = mlp_forward(tape, params, model.user_projection, user_features);
  Var h2 = mlp_forward(tape, params, model.item_projection, item_features);
  if (model.user_prior) h1 = h1 + tape.parameter(params[*model.user_prior]);
  if (model.item_prior) h2 = h2 + tape.parameter(params[*model.item_prior]);
  return {h1, h2};
}

Var social_aggregate(const SocialOperator& op, Var h, std::size_t levels) {
  for (std::size_t l = 0; l < levels; ++l) {
    Var next = spmm(op.matrix, h);
    h = op.add_self ? next + h : next;
  }
  return h;
}

DenseMatrix social_aggregate(const SocialOperator& op, const DenseMatrix& h, std::size_t levels) {
  DenseMatrix cur = h;
  for (std::size_t l = 0; l < levels; ++l) {
    DenseMatrix next = spmm(op.matrix, cur);
    if (op.add_self) {
      auto n = next.values();
      auto c = cur.values();
      for (std::size_t i = 0; i < n.size(); ++i) n[i] += c[i];
    }
    cur = std::move(next);
  }
  return cur;
}

namespace {

std::vector<double> nonzero_mask(std::span<const double> degrees) {
  std::vector<double> m(degrees.size());
  for (std::size_t i = 0; i < degrees.size(); ++i) m[i] = degrees[i] > 0.0 ? 1.0 : 0.0;
  return m;
}

}  // namespace

PropagatedVars interest_propagate(Tape& tape, NemoModel& model, const BipartiteGraph& graph, Var user_aggregated,
                                  Var item_hidden) {
  if (graph.positive.rows() != user_aggregated.rows() || graph.positive.cols() != item_hidden.rows()) {
    throw DimensionError("interest_propagate: bipartite graph does not match representation rows");
  }
  auto& params = model.params();

  Var user_mean = scale_rows(spmm(graph.positive, item_hidden), inverse_degrees(graph.user_positive_degree));
  Var user_out = user_mean + user_aggregated;

  Var pos_mean = scale_rows(spmm_transposed(graph.positive, user_aggregated), inverse_degrees(graph.item_positive_degree));
  Var pos_term = scale_rows(mlp_forward(tape, params, model.positive_propagation, pos_mean),
                            nonzero_mask(graph.item_positive_degree));
  Var neg_mean = scale_rows(spmm_transposed(graph.negative, user_aggregated), inverse_degrees(graph.item_negative_degree));
  Var neg_term = scale_rows(mlp_forward(tape, params, model.negative_propagation, neg_mean),
                            nonzero_mask(graph.item_negative_degree));
  Var item_out = pos_term + neg_term + item_hidden;
  return {user_out, item_out};
}

ForwardVars forward(Tape& tape, NemoModel& model, const Dataset& dataset, const SocialOperator& social,
                    const BipartiteGraph& graph) {
  if (dataset.num_users != model.num_users() || dataset.num_items != model.num_items()) {
    throw DimensionError("forward: dataset has " + std::to_string(dataset.num_users) + "x" +
                         std::to_string(dataset.num_items) + " users x items, model expects " +
                         std::to_string(model.num_users()) + "x" + std::to_string(model.num_items()));
  }
  ForwardVars f;
  f.hidden = hidden_reps(tape, model, tape.constant(dataset.user_features), tape.constant(dataset.item_features));
  f.user_aggregated = social_aggregate(social, f.hidden.user, model.config().levels);
  f.out = interest_propagate(tape, model, graph, f.user_aggregated, f.hidden.item);
  return f;
}

Representations compute_representations(NemoModel& model, const Dataset& dataset, const SocialOperator& social,
                                        const BipartiteGraph& graph) {
  Tape tape;
  auto f = forward(tape, model, dataset, social, graph);
  return {f.out.user.value(), f.out.item.value(), f.hidden.item.value()};
}

std::vector<double> predict(const DenseMatrix& user_reps, const DenseMatrix& item_reps,
                            std::span<const Interaction> pairs) {
  if (user_reps.cols() != item_reps.cols()) throw DimensionError("predict: representation widths differ");
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.user >= user_reps.rows() || p.item >= item_reps.rows()) throw DimensionError("predict: pair out of range");
    auto u = user_reps.row(p.user);
    auto i = item_reps.row(p.item);
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * i[k];
    out.push_back(s);
  }
  return out;
}

}  // namespace nemo
