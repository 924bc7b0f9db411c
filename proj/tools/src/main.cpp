#include <CLI11.hpp>

#include <iostream>

#include "nemo/errors.hpp"
#include "nemo_app/app.hpp"

namespace {

nemo::KeyValues parse_overrides(const std::vector<std::string>& items) {
  std::string text;
  for (const auto& s : items) text += s + "\n";
  return nemo::parse_key_values(text, "--set");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Social recommendation with a multi-network GNN, negative sampling and an MF baseline."};
  cli.require_subcommand(1);
  cli.fallthrough();

  std::string config_path, seed_list, out_dir, sampler, model, reg;
  std::vector<std::string> sets;
  cli.add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  cli.add_option("--seed", seed_list, "comma-separated seed list");
  cli.add_option("--out", out_dir, "output directory");
  cli.add_option("--set", sets, "config override key=value (repeatable)");
  cli.add_option("--sampler", sampler, "fixed|static|dynamic|generative");
  cli.add_option("--model", model, "nemo|mf");
  cli.add_option("--reg", reg, "average|individual (MF baseline regularizer)");

  auto* synth = cli.add_subcommand("synth", "generate a synthetic dataset");
  auto* train = cli.add_subcommand("train", "train one run per seed");
  auto* eval = cli.add_subcommand("eval", "evaluate trained runs");
  std::string run_dir, checkpoint, part = "test";
  auto* run_opt = eval->add_option("--run", run_dir, "run directory written by train");
  eval->add_option("--checkpoint", checkpoint, "single checkpoint file (uses --config)")->excludes(run_opt);
  eval->add_option("--part", part, "test|validation")->check(CLI::IsMember({"test", "validation"}));
  auto* ablate = cli.add_subcommand("ablate", "prior / sampler / depth / aggregation sweeps");
  auto* gradcheck = cli.add_subcommand("gradcheck", "finite-difference check of nemo and mf gradients");
  double tolerance = 1e-4;
  bool plant_bug = false;
  gradcheck->add_option("--tolerance", tolerance, "maximum relative error");
  gradcheck->add_flag("--plant-bug", plant_bug)->group("");

  CLI11_PARSE(cli, argc, argv);

  try {
    nemo::KeyValues kv;
    if (!config_path.empty()) kv = nemo::read_key_values(config_path);
    const auto overrides = parse_overrides(sets);
    for (const auto& [k, v] : overrides) kv[k] = v;
    if (!seed_list.empty()) kv["seeds"] = seed_list;
    if (!sampler.empty()) kv["sampler.kind"] = sampler;
    if (!model.empty()) kv["model"] = model;
    if (!reg.empty()) kv["mf.reg"] = reg;
    const auto config = nemo::app::apply_config(nemo::app::RunConfig{}, kv);

    if (*synth) return nemo::app::cmd_synth(config, out_dir.empty() ? "data" : out_dir, std::cout);
    if (*train) return nemo::app::cmd_train(config, out_dir.empty() ? "runs" : out_dir, std::cout);
    if (*eval) {
      if (run_dir.empty() && checkpoint.empty()) throw nemo::ConfigError("eval needs --run DIR or --checkpoint PATH");
      nemo::app::EvalRequest req{run_dir, checkpoint, part, {}};
      // Explicit flags override what each run stored; the config file does not.
      req.overrides = overrides;
      if (!sampler.empty()) req.overrides["sampler.kind"] = sampler;
      if (!checkpoint.empty()) req.overrides = {};
      const std::string out = out_dir.empty() ? (run_dir.empty() ? "eval" : run_dir + "/eval") : out_dir;
      return nemo::app::cmd_eval(config, req, out, std::cout);
    }
    if (*ablate) return nemo::app::cmd_ablate(config, out_dir.empty() ? "ablation" : out_dir, std::cout);
    if (*gradcheck) return nemo::app::cmd_gradcheck(config, tolerance, plant_bug, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
