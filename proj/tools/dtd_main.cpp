#include "dtd/checkpoint.hpp"
#include "dtd/config.hpp"
#include "dtd/errors.hpp"
#include "dtd/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int train(const std::string& config_path, const std::string& algo, int seeds,
          const std::string& out, int jobs, bool quiet) {
  dtd::RunManifest manifest;
  manifest.config = config_path.empty() ? dtd::parse_config("") : dtd::load_config(config_path);
  manifest.algorithm = dtd::algorithm_from_string(algo);
  manifest.seeds = dtd::seed_range(manifest.config.seed, seeds);
  manifest.output_dir = out;
  manifest.jobs = jobs;
  const auto runs = dtd::run_train(manifest, quiet ? nullptr : &std::cout);
  for (const auto& r : runs) {
    std::cout << "seed " << r.seed << ": final success " << r.epochs.back().success_rate
              << ", best epoch " << r.best_epoch << " -> " << r.dir.string() << '\n';
  }
  return 0;
}

int eval(const std::string& checkpoint, int episodes, std::uint64_t seed, const std::string& env,
         const std::string& out) {
  const dtd::Checkpoint ckpt = dtd::load_checkpoint(checkpoint);
  if (!env.empty()) dtd::check_compatible(ckpt, dtd::env_spec(env));
  const dtd::EvalResult result = dtd::run_eval(ckpt, episodes, seed);
  std::cout << "env: " << ckpt.config.env << '\n' << dtd::format_eval_report(result);
  if (!out.empty()) dtd::write_eval_csv(out, result);
  return 0;
}

int heatmap(const std::string& checkpoint, const std::string& scenario, int resolution,
            const std::string& out) {
  const dtd::Checkpoint ckpt = dtd::load_checkpoint(checkpoint);
  const dtd::Heatmap map = dtd::compute_heatmap(ckpt, scenario, resolution);
  dtd::write_heatmap_csv(out, map);
  const auto& best = map.cells[map.argmax];
  std::cout << "q range [" << map.min << ", " << map.max << "], argmax (" << best.x << ", "
            << best.y << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-level goal-conditioned RL with hindsight relabeling"};
  app.set_version_flag("--version", std::string(dtd::kToolVersion));
  app.require_subcommand(1);

  std::string config_path, algo = "dtd", out;
  int seeds = 1, jobs = 1;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "Train one or more seeds");
  train_cmd->add_option("--config", config_path, "Config file (key: value lines)");
  train_cmd->add_option("--algo", algo, "ddpg, her or dtd")
      ->check(CLI::IsMember({"ddpg", "her", "dtd"}));
  train_cmd->add_option("--seeds", seeds, "Number of seeds, counting up from the config seed")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", out, "Output directory")->required();
  train_cmd->add_option("--jobs", jobs, "Seeds trained in parallel")->check(CLI::PositiveNumber);
  train_cmd->add_flag("--quiet", quiet, "Only print the summary");

  std::string checkpoint, env, eval_out;
  int episodes = 10;
  std::uint64_t seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint without exploration noise");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--episodes", episodes)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", seed, "First episode seed");
  eval_cmd->add_option("--env", env, "Refuse the checkpoint unless it fits this env");
  eval_cmd->add_option("--out", eval_out, "Per-episode CSV");

  std::string scenario, heat_out;
  int resolution = 20;
  auto* heat_cmd = app.add_subcommand("heatmap", "High-level Q values over a sub-goal grid");
  heat_cmd->add_option("--checkpoint", checkpoint)->required();
  heat_cmd->add_option("--scenario", scenario)->required();
  heat_cmd->add_option("--resolution", resolution, "Cells per axis");
  heat_cmd->add_option("--out", heat_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train_cmd) return train(config_path, algo, seeds, out, jobs, quiet);
    if (*eval_cmd) return eval(checkpoint, episodes, seed, env, eval_out);
    if (*heat_cmd) return heatmap(checkpoint, scenario, resolution, heat_out);
  } catch (const dtd::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
