#include "nemo_app/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "nemo/checkpoint.hpp"
#include "nemo/errors.hpp"
#include "nemo/random.hpp"

namespace nemo::app {

namespace fs = std::filesystem;

std::string to_string(ModelKind k) { return k == ModelKind::nemo ? "nemo" : "mf"; }

namespace {

ModelKind parse_model_kind(std::string_view s) {
  if (s == "nemo") return ModelKind::nemo;
  if (s == "mf") return ModelKind::mf;
  throw ConfigError("unknown model '" + std::string(s) + "' (nemo|mf)");
}

std::string join(const std::vector<std::uint64_t>& v) {
  std::string out;
  for (std::size_t j = 0; j < v.size(); ++j) out += (j ? "," : "") + std::to_string(v[j]);
  return out;
}

template <class T>
std::vector<T> narrow_list(std::string_view key, std::string_view value) {
  std::vector<T> out;
  for (auto x : parse_uint_list(key, value)) out.push_back(static_cast<T>(x));
  return out;
}

const std::vector<std::string> kRunKeys = {
    "model",
    "model.dim",
    "model.levels",
    "model.prior_std",
    "model.prior",
    "model.self_loop",
    "model.aggregation",
    "model.projection_layers",
    "model.propagation_layers",
    "sampler.kind",
    "sampler.n_neg",
    "sampler.pool_size",
    "sampler.beta",
    "sampler.dynamic_multiplier",
    "sampler.anchor",
    "train.lr",
    "train.batch_size",
    "train.weight_decay",
    "train.max_epochs",
    "train.patience",
    "mf.dim",
    "mf.beta",
    "mf.lambda_user",
    "mf.lambda_item",
    "mf.reg",
    "mf.lr",
    "eval.negatives",
    "eval.k",
    "data.ratings",
    "data.social",
    "data.user_features",
    "data.item_features",
    "seeds",
    "ablate.levels",
};

const std::vector<std::string> kSynthKeys = {
    "synth.communities",   "synth.users_per_community", "synth.items_per_community", "synth.social_within",
    "synth.social_cross",  "synth.interact_within",     "synth.popularity_decay",    "synth.interact_cross",
    "synth.feature_dim",   "synth.feature_scale",       "synth.feature_noise",       "synth.seed",
};

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> all = [] {
    auto v = kRunKeys;
    v.insert(v.end(), kSynthKeys.begin(), kSynthKeys.end());
    return v;
  }();
  return all;
}

RunConfig apply_config(RunConfig c, const KeyValues& kv) {
  KeyValues synth_kv = parse_key_values(synth_config_to_text(c.synth));
  std::map<std::string, std::string> data;
  if (c.data) {
    data = {{"ratings", c.data->ratings},
            {"social", c.data->social},
            {"user_features", c.data->user_features},
            {"item_features", c.data->item_features}};
  }
  bool data_touched = false;

  for (const auto& [key, value] : kv) {
    if (key.starts_with("synth.")) {
      synth_kv[key.substr(6)] = value;
    } else if (key.starts_with("data.")) {
      const auto field = key.substr(5);
      if (field != "ratings" && field != "social" && field != "user_features" && field != "item_features") {
        throw ConfigError("unknown config key '" + key + "'");
      }
      data[field] = value;
      data_touched = true;
    } else if (key == "model") c.model = parse_model_kind(value);
    else if (key == "model.dim") c.nemo.dim = parse_uint(key, value);
    else if (key == "model.levels") c.nemo.levels = parse_uint(key, value);
    else if (key == "model.prior_std") c.nemo.prior_std = parse_double(key, value);
    else if (key == "model.prior") c.nemo.prior = parse_prior_kind(value);
    else if (key == "model.self_loop") c.nemo.self_loop = parse_bool(key, value);
    else if (key == "model.aggregation") c.nemo.aggregation = parse_aggregation_kind(value);
    else if (key == "model.projection_layers") c.nemo.projection_layers = parse_uint(key, value);
    else if (key == "model.propagation_layers") c.nemo.propagation_layers = parse_uint(key, value);
    else if (key == "sampler.kind") c.sampler.kind = parse_sampler_kind(value);
    else if (key == "sampler.n_neg") c.sampler.negatives_per_user = parse_uint(key, value);
    else if (key == "sampler.pool_size") c.sampler.pool_size = parse_uint(key, value);
    else if (key == "sampler.beta") c.sampler.beta = parse_double(key, value);
    else if (key == "sampler.dynamic_multiplier") c.sampler.dynamic_multiplier = parse_uint(key, value);
    else if (key == "sampler.anchor") {
      if (value != "propagated" && value != "hidden") {
        throw ConfigError("sampler.anchor must be 'propagated' or 'hidden', got '" + value + "'");
      }
      c.sampler.anchor_propagated = value == "propagated";
    }
    else if (key == "train.lr") c.train.learning_rate = parse_double(key, value);
    else if (key == "train.batch_size") c.train.batch_size = parse_uint(key, value);
    else if (key == "train.weight_decay") c.train.weight_decay = parse_double(key, value);
    else if (key == "train.max_epochs") c.train.max_epochs = parse_uint(key, value);
    else if (key == "train.patience") c.train.patience = parse_uint(key, value);
    else if (key == "mf.dim") c.mf.dim = parse_uint(key, value);
    else if (key == "mf.beta") c.mf.beta = parse_double(key, value);
    else if (key == "mf.lambda_user") c.mf.lambda_user = parse_double(key, value);
    else if (key == "mf.lambda_item") c.mf.lambda_item = parse_double(key, value);
    else if (key == "mf.reg") c.mf.reg = parse_social_reg_kind(value);
    else if (key == "mf.lr") c.mf_learning_rate = parse_double(key, value);
    else if (key == "eval.negatives") c.protocol.negatives = parse_uint(key, value);
    else if (key == "eval.k") c.protocol.ks = narrow_list<std::size_t>(key, value);
    else if (key == "seeds") c.seeds = parse_uint_list(key, value);
    else if (key == "ablate.levels") c.ablate_levels = narrow_list<std::size_t>(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  }

  c.synth = synth_config_from(synth_kv, false);
  if (data_touched || c.data) {
    for (const char* f : {"ratings", "social", "user_features", "item_features"}) {
      if (data[f].empty()) throw ConfigError(std::string("data.") + f + " is required when any data.* key is set");
    }
    c.data = DatasetPaths{data["ratings"], data["social"], data["user_features"], data["item_features"]};
  }
  if (c.seeds.empty()) throw ConfigError("seeds must list at least one seed");
  c.nemo.validate();
  c.sampler.validate();
  c.train.validate();
  c.protocol.validate();
  c.mf.validate();
  if (!(c.mf_learning_rate >= 0.0)) throw ConfigError("mf.lr must be >= 0");
  return c;
}

std::string to_text(const RunConfig& c) {
  std::ostringstream o;
  auto list = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t j = 0; j < v.size(); ++j) s += (j ? "," : "") + std::to_string(v[j]);
    return s;
  };
  o << "model=" << to_string(c.model) << '\n'
    << "model.dim=" << c.nemo.dim << '\n'
    << "model.levels=" << c.nemo.levels << '\n'
    << "model.prior_std=" << format_double(c.nemo.prior_std) << '\n'
    << "model.prior=" << to_string(c.nemo.prior) << '\n'
    << "model.self_loop=" << (c.nemo.self_loop ? "true" : "false") << '\n'
    << "model.aggregation=" << to_string(c.nemo.aggregation) << '\n'
    << "model.projection_layers=" << c.nemo.projection_layers << '\n'
    << "model.propagation_layers=" << c.nemo.propagation_layers << '\n'
    << "sampler.kind=" << to_string(c.sampler.kind) << '\n'
    << "sampler.n_neg=" << c.sampler.negatives_per_user << '\n'
    << "sampler.pool_size=" << c.sampler.pool_size << '\n'
    << "sampler.beta=" << format_double(c.sampler.beta) << '\n'
    << "sampler.dynamic_multiplier=" << c.sampler.dynamic_multiplier << '\n'
    << "sampler.anchor=" << (c.sampler.anchor_propagated ? "propagated" : "hidden") << '\n'
    << "train.lr=" << format_double(c.train.learning_rate) << '\n'
    << "train.batch_size=" << c.train.batch_size << '\n'
    << "train.weight_decay=" << format_double(c.train.weight_decay) << '\n'
    << "train.max_epochs=" << c.train.max_epochs << '\n'
    << "train.patience=" << c.train.patience << '\n'
    << "mf.dim=" << c.mf.dim << '\n'
    << "mf.beta=" << format_double(c.mf.beta) << '\n'
    << "mf.lambda_user=" << format_double(c.mf.lambda_user) << '\n'
    << "mf.lambda_item=" << format_double(c.mf.lambda_item) << '\n'
    << "mf.reg=" << to_string(c.mf.reg) << '\n'
    << "mf.lr=" << format_double(c.mf_learning_rate) << '\n'
    << "eval.negatives=" << c.protocol.negatives << '\n'
    << "eval.k=" << list(c.protocol.ks) << '\n';
  if (c.data) {
    o << "data.ratings=" << c.data->ratings << '\n'
      << "data.social=" << c.data->social << '\n'
      << "data.user_features=" << c.data->user_features << '\n'
      << "data.item_features=" << c.data->item_features << '\n';
  }
  o << "seeds=" << join(c.seeds) << '\n' << "ablate.levels=" << list(c.ablate_levels) << '\n';
  std::istringstream synth(synth_config_to_text(c.synth));
  for (std::string line; std::getline(synth, line);) {
    if (!line.empty()) o << "synth." << line << '\n';
  }
  return o.str();
}

Dataset load_data(const RunConfig& config) {
  if (config.data) return load_dataset(*config.data);
  return synth_generate(config.synth).dataset;
}

fs::path fresh_directory(const fs::path& dir) {
  if (!fs::exists(dir) || (fs::is_directory(dir) && fs::is_empty(dir))) return dir;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  fs::path candidate = dir.string() + "-" + stamp.str();
  for (int k = 2; fs::exists(candidate); ++k) candidate = dir.string() + "-" + stamp.str() + "-" + std::to_string(k);
  return candidate;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

void make_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create directory " + dir.string());
}

RunConfig for_seed(RunConfig c, std::uint64_t seed) {
  c.seeds = {seed};
  c.train.seed = seed;
  c.protocol.seed = seed;
  return c;
}

}  // namespace

int cmd_synth(const RunConfig& config, const fs::path& out, std::ostream& log) {
  const auto dir = fresh_directory(out);
  make_directory(dir);
  const auto data = synth_generate(config.synth);
  const DatasetPaths paths{(dir / "ratings.tsv").string(), (dir / "social.tsv").string(),
                           (dir / "user_features.txt").string(), (dir / "item_features.txt").string()};
  save_dataset(data.dataset, paths);
  write_text(dir / "synth.conf", synth_config_to_text(config.synth));
  log << "wrote " << dir.string() << ": users=" << data.dataset.num_users << " items=" << data.dataset.num_items
      << " interactions=" << data.dataset.interactions.nnz() << " social_edges=" << data.dataset.social.nnz() / 2
      << " assortativity="
      << format_double(interaction_assortativity(data.dataset.interactions, data.user_community, data.item_community,
                                                 config.synth.communities))
      << '\n';
  return 0;
}

int cmd_train(const RunConfig& config, const fs::path& out, std::ostream& log) {
  const Dataset data = load_data(config);
  make_directory(out);
  for (auto seed : config.seeds) {
    const RunConfig rc = for_seed(config, seed);
    const auto dir = fresh_directory(out / ("seed-" + std::to_string(seed)));
    make_directory(dir);
    const auto split = split_interactions(data, seed);
    TrainReport report;
    if (rc.model == ModelKind::nemo) {
      auto r = fit(data, split, rc.nemo, rc.sampler, rc.train, rc.protocol);
      write_checkpoint((dir / "checkpoint.bin").string(), make_checkpoint(r.model, r.negatives));
      report = std::move(r.report);
    } else {
      TrainingConfig tc = rc.train;
      tc.learning_rate = rc.mf_learning_rate;
      auto r = mf_fit(data, split, rc.mf, rc.sampler, tc, rc.protocol);
      write_checkpoint((dir / "checkpoint.bin").string(), make_mf_checkpoint(r.model));
      report = std::move(r.report);
    }
    write_text(dir / "train_report.jsonl", to_jsonl(report));
    write_text(dir / "config.txt", to_text(rc));
    log << "seed " << seed << ": " << report.model << "/" << report.sampler << " best epoch " << report.best_epoch
        << " of " << report.epochs.size() << ", validation NDCG@10 " << format_double(report.best_ndcg10) << " -> "
        << dir.string() << '\n';
  }
  return 0;
}

namespace {

MetricsReport evaluate_checkpoint(const RunConfig& rc, const fs::path& checkpoint, const std::string& part) {
  if (part != "test" && part != "validation") throw ConfigError("--part must be 'test' or 'validation'");
  const std::uint64_t seed = rc.seeds.front();
  const RunConfig c = for_seed(rc, seed);
  const Dataset data = load_data(c);
  const auto split = split_interactions(data, seed);
  const auto& targets = part == "test" ? split.test : split.validation;
  const auto ckpt = read_checkpoint(checkpoint.string());
  MetricsReport report;
  if (c.model == ModelKind::nemo) {
    NemoModel model(c.nemo, data.num_users, data.num_items, data.user_features.cols(), data.item_features.cols(), seed);
    const auto negatives = load_checkpoint(ckpt, model);
    const auto ctx = make_training_context(data, split, c.nemo);
    report = evaluate_model(ctx, model, negatives, targets, c.protocol);
  } else {
    MfModel model(data.num_users, data.num_items, c.mf, seed);
    load_mf_checkpoint(ckpt, model);
    const UserItemIndex observed(data.num_users, data.interaction_list());
    report = evaluate_mf(model, targets, observed, c.protocol);
  }
  report.seed = seed;
  return report;
}

std::vector<fs::path> run_directories(const fs::path& run) {
  if (fs::exists(run / "checkpoint.bin")) return {run};
  std::vector<std::pair<std::uint64_t, fs::path>> found;
  if (fs::is_directory(run)) {
    for (const auto& entry : fs::directory_iterator(run)) {
      const auto name = entry.path().filename().string();
      if (!entry.is_directory() || !name.starts_with("seed-") || !fs::exists(entry.path() / "checkpoint.bin")) continue;
      // Timestamped reruns (seed-3-2024...) sort after the original.
      const auto digits = name.substr(5, name.find('-', 5) == std::string::npos ? std::string::npos : name.find('-', 5) - 5);
      found.emplace_back(parse_uint("run directory", digits), entry.path());
    }
  }
  if (found.empty()) throw ConfigError("no checkpoint.bin under " + run.string());
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& f : found) out.push_back(f.second);
  return out;
}

}  // namespace

int cmd_eval(const RunConfig& base, const EvalRequest& request, const fs::path& out, std::ostream& log) {
  std::vector<MetricsReport> reports;
  if (!request.checkpoint.empty()) {
    for (auto seed : base.seeds) {
      reports.push_back(evaluate_checkpoint(apply_config(for_seed(base, seed), request.overrides), request.checkpoint,
                                            request.part));
    }
  } else {
    for (const auto& dir : run_directories(request.run)) {
      const auto stored = parse_key_values(read_text(dir / "config.txt"), (dir / "config.txt").string());
      const RunConfig rc = apply_config(apply_config(RunConfig{}, stored), request.overrides);
      reports.push_back(evaluate_checkpoint(rc, dir / "checkpoint.bin", request.part));
    }
  }
  const auto dir = fresh_directory(out);
  make_directory(dir);
  if (reports.size() == 1) {
    write_text(dir / "metrics.json", to_json(reports.front()));
    write_text(dir / "metrics.tsv", to_tsv(reports.front()));
  } else {
    for (const auto& r : reports) {
      write_text(dir / ("metrics-seed-" + std::to_string(r.seed) + ".json"), to_json(r));
      write_text(dir / ("metrics-seed-" + std::to_string(r.seed) + ".tsv"), to_tsv(r));
    }
    const auto summary = summarize(reports);
    write_text(dir / "metrics.json", to_json(summary));
    write_text(dir / "metrics.tsv", to_tsv(summary));
  }
  for (const auto& r : reports) {
    log << "seed " << r.seed << " " << r.model << " " << request.part << ":";
    for (std::size_t j = 0; j < r.ks.size(); ++j) {
      log << " HR@" << r.ks[j] << "=" << std::fixed << std::setprecision(4) << r.hr[j] << " NDCG@" << r.ks[j] << "="
          << r.ndcg[j];
    }
    log << std::defaultfloat << " (users " << r.users_evaluated << ", short candidate lists " << r.users_exhausted
        << ")\n";
  }
  log << "wrote " << (dir / "metrics.json").string() << '\n';
  return 0;
}

namespace {

struct AblationRun {
  std::string axis;
  std::string value;
  std::uint64_t seed;
  MetricsReport test;
  double validation_ndcg10;
  std::size_t best_epoch;
};

std::string table_header(const std::vector<std::size_t>& ks, bool with_std) {
  std::string h;
  for (const char* m : {"HR", "NDCG"}) {
    for (auto k : ks) {
      h += std::string("\t") + m + "@" + std::to_string(k);
      if (with_std) h += std::string("\t") + m + "@" + std::to_string(k) + "_std";
    }
  }
  return h;
}

}  // namespace

int cmd_ablate(const RunConfig& config, const fs::path& out, std::ostream& log) {
  if (config.model != ModelKind::nemo) throw ConfigError("ablate runs the nemo model only");
  const Dataset data = load_data(config);
  const auto dir = fresh_directory(out);
  make_directory(dir);

  struct Axis {
    std::string name;
    std::vector<std::pair<std::string, RunConfig>> values;
  };
  std::vector<Axis> axes;
  {
    Axis a{"prior", {}};
    for (auto p : {PriorKind::gaussian, PriorKind::uniform, PriorKind::none}) {
      RunConfig c = config;
      c.nemo.prior = p;
      a.values.emplace_back(to_string(p), c);
    }
    axes.push_back(std::move(a));
  }
  {
    Axis a{"sampler", {}};
    for (auto s : {SamplerKind::fixed, SamplerKind::resample, SamplerKind::generative}) {
      RunConfig c = config;
      c.sampler.kind = s;
      a.values.emplace_back(to_string(s), c);
    }
    axes.push_back(std::move(a));
  }
  for (auto agg : {AggregationKind::plain, AggregationKind::gcn}) {
    Axis a{agg == AggregationKind::plain ? "levels" : "levels_gcn", {}};
    for (auto l : config.ablate_levels) {
      RunConfig c = config;
      c.nemo.levels = l;
      c.nemo.aggregation = agg;
      a.values.emplace_back(std::to_string(l), c);
    }
    axes.push_back(std::move(a));
  }
  {
    Axis a{"aggregation", {}};
    for (auto agg : {AggregationKind::plain, AggregationKind::gcn}) {
      RunConfig c = config;
      c.nemo.aggregation = agg;
      a.values.emplace_back(to_string(agg), c);
    }
    axes.push_back(std::move(a));
  }

  // Identical configurations (e.g. the default point shared by every axis) run once.
  std::map<std::pair<std::string, std::uint64_t>, AblationRun> cache;
  std::vector<AblationRun> runs;
  const auto& ks = config.protocol.ks;
  for (const auto& axis : axes) {
    std::ostringstream table;
    table << axis.name << "\truns" << table_header(ks, true) << "\tval_NDCG@10\n";
    for (const auto& [value, c] : axis.values) {
      std::vector<MetricsReport> reports;
      double val_sum = 0.0;
      for (auto seed : config.seeds) {
        const RunConfig rc = for_seed(c, seed);
        const auto key = std::make_pair(to_text(rc), seed);
        auto it = cache.find(key);
        if (it == cache.end()) {
          const auto split = split_interactions(data, seed);
          auto r = fit(data, split, rc.nemo, rc.sampler, rc.train, rc.protocol);
          const auto ctx = make_training_context(data, split, rc.nemo);
          AblationRun run{axis.name, value, seed,
                          evaluate_model(ctx, r.model, r.negatives, split.test, rc.protocol), r.report.best_ndcg10,
                          r.report.best_epoch};
          it = cache.emplace(key, run).first;
          log << axis.name << "=" << value << " seed " << seed << ": test NDCG@10 "
              << format_double(run.test.ndcg_at(ks.size() > 1 ? ks[1] : ks[0])) << ", validation NDCG@10 "
              << format_double(run.validation_ndcg10) << '\n';
        }
        AblationRun run = it->second;
        run.axis = axis.name;
        run.value = value;
        runs.push_back(run);
        reports.push_back(run.test);
        val_sum += run.validation_ndcg10;
      }
      const auto s = summarize(reports);
      table << value << '\t' << reports.size();
      for (std::size_t j = 0; j < ks.size(); ++j) {
        table << '\t' << format_double(s.hr_mean[j]) << '\t' << format_double(s.hr_std[j]);
      }
      for (std::size_t j = 0; j < ks.size(); ++j) {
        table << '\t' << format_double(s.ndcg_mean[j]) << '\t' << format_double(s.ndcg_std[j]);
      }
      table << '\t' << format_double(val_sum / static_cast<double>(reports.size())) << '\n';
    }
    write_text(dir / ("ablation_" + axis.name + ".tsv"), table.str());
  }

  std::ostringstream all;
  all << "axis\tvalue\tseed" << table_header(ks, false) << "\tval_NDCG@10\tbest_epoch\n";
  for (const auto& r : runs) {
    all << r.axis << '\t' << r.value << '\t' << r.seed;
    for (double v : r.test.hr) all << '\t' << format_double(v);
    for (double v : r.test.ndcg) all << '\t' << format_double(v);
    all << '\t' << format_double(r.validation_ndcg10) << '\t' << r.best_epoch << '\n';
  }
  write_text(dir / "ablation_runs.tsv", all.str());
  log << "wrote " << runs.size() << " runs (" << cache.size() << " distinct) to " << dir.string() << '\n';
  return 0;
}

namespace {

template <class Fn>
GradcheckOutcome timed_check(const std::string& model, std::uint64_t seed, ParameterSet& params, Fn&& loss) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckOptions opt;
  opt.seed = seed;
  GradcheckOutcome o;
  o.model = model;
  o.seed = seed;
  o.result = finite_diff_check(loss, params, opt);
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return o;
}

void double_gradients(ParameterSet& params) {
  for (auto& p : params.all()) {
    for (auto& g : p.grad.values()) g *= 2.0;
  }
}

}  // namespace

GradcheckOutcome nemo_gradcheck(std::uint64_t seed, bool plant_bug) {
  SynthConfig sc;
  sc.communities = 2;
  sc.users_per_community = 10;
  sc.items_per_community = 15;
  sc.feature_dim = 5;
  sc.social_within = 0.3;
  sc.interact_within = 0.9;
  sc.popularity_decay = 0.95;
  sc.seed = seed;
  const Dataset data = synth_generate(sc).dataset;
  const auto split = split_interactions(data, seed);

  ModelConfig mc;
  mc.dim = 8;
  mc.levels = 2;
  NemoModel model(mc, data.num_users, data.num_items, data.user_features.cols(), data.item_features.cols(), seed);
  SamplerConfig sampler;
  sampler.kind = SamplerKind::generative;
  const auto ctx = make_training_context(data, split, mc);
  const auto negatives = assemble_negatives(ctx.observed, ctx.train_positives, data.num_items, {}, sampler, 0, seed);
  const auto neg_pairs = negatives.pairs();
  const auto graph = build_bipartite(data.num_users, data.num_items, split.train, neg_pairs);
  const auto pooling = pooling_matrix(negatives.fakes, data.num_items);

  std::vector<std::uint32_t> users, items, fake_users, anchors;
  std::vector<double> targets, alphas;
  for (const auto& p : split.train) {
    users.push_back(p.user);
    items.push_back(p.item);
    targets.push_back(1.0);
  }
  for (const auto& p : neg_pairs) {
    users.push_back(p.user);
    items.push_back(p.item);
    targets.push_back(0.0);
  }
  for (const auto& f : negatives.fakes) {
    fake_users.push_back(f.user);
    anchors.push_back(f.anchor_item);
    alphas.push_back(f.alpha);
  }
  const std::vector<double> zeros(fake_users.size(), 0.0);

  auto loss = [&](bool with_gradients) {
    Tape tape;
    auto f = forward(tape, model, data, ctx.social, graph);
    Var l = squared_error(row_dot(gather_rows(f.out.user, users), gather_rows(f.out.item, items)), targets);
    Var z = generate_fakes(tape, model.params(), model.generator, gather_rows(f.out.item, anchors),
                           spmm(pooling, f.out.item), alphas);
    l = l + squared_error(row_dot(gather_rows(f.out.user, fake_users), z), zeros);
    if (with_gradients) {
      tape.backward(l);
      if (plant_bug) double_gradients(model.params());
    }
    return l.value()(0, 0);
  };
  return timed_check("nemo", seed, model.params(), loss);
}

GradcheckOutcome mf_gradcheck(std::uint64_t seed, SocialRegKind reg, bool plant_bug) {
  SynthConfig sc;
  sc.communities = 2;
  sc.users_per_community = 5;
  sc.items_per_community = 6;
  sc.social_within = 0.6;
  sc.social_cross = 0.1;
  sc.interact_within = 0.9;
  sc.popularity_decay = 0.9;
  sc.interact_cross = 0.1;
  sc.seed = seed;
  const Dataset data = synth_generate(sc).dataset;

  MfConfig mc;
  mc.dim = 4;
  mc.beta = 0.5;
  mc.lambda_user = 0.1;
  mc.lambda_item = 0.2;
  mc.reg = reg;
  MfModel model(data.num_users, data.num_items, mc, seed);
  const auto op = social_reg_operator(social_similarity(data.social, data.interactions), reg);
  std::vector<Rating> ratings;
  for (const auto& p : data.interaction_list()) ratings.push_back({p.user, p.item, 1.0});
  Rng rng(stream_seed(seed, Stream::gradcheck));
  const UserItemIndex observed(data.num_users, data.interaction_list());
  for (std::uint32_t u = 0; u < data.num_users; ++u) {
    for (auto i : uniform_sample(observed.items(u), data.num_items, 2, rng).items) ratings.push_back({u, i, 0.0});
  }

  auto loss = [&](bool with_gradients) {
    Tape tape;
    Var l = mf_loss(tape, model, ratings, op);
    if (with_gradients) {
      tape.backward(l);
      if (plant_bug) double_gradients(model.params());
    }
    return l.value()(0, 0);
  };
  return timed_check("mf-" + to_string(reg), seed, model.params(), loss);
}

int cmd_gradcheck(const RunConfig& config, double tolerance, bool plant_bug, std::ostream& log) {
  bool ok = true;
  auto report = [&](const GradcheckOutcome& o) {
    const bool pass = o.result.max_relative_error <= tolerance;
    ok = ok && pass;
    log << o.model << " seed " << o.seed << ": max relative error " << format_double(o.result.max_relative_error)
        << " at " << o.result.worst_parameter << "[" << o.result.worst_index << "]"
        << " (analytic " << format_double(o.result.worst_analytic) << ", numeric "
        << format_double(o.result.worst_numeric) << "), " << o.result.coordinates_checked << " coordinates, "
        << std::fixed << std::setprecision(2) << o.seconds << std::defaultfloat << "s " << (pass ? "PASS" : "FAIL")
        << '\n';
  };
  for (auto seed : config.seeds) {
    report(nemo_gradcheck(seed, plant_bug));
    report(mf_gradcheck(seed, SocialRegKind::average, plant_bug));
    report(mf_gradcheck(seed, SocialRegKind::individual, plant_bug));
  }
  log << (ok ? "gradcheck passed" : "gradcheck FAILED") << " (tolerance " << format_double(tolerance) << ")\n";
  return ok ? 0 : 1;
}

}  // namespace nemo::app
