#include "dtd/harness.hpp"

#include "dtd/config.hpp"
#include "dtd/errors.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace dtd {

namespace fs = std::filesystem;

namespace {

// Shortest representation that reads back to the same double.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string ckpt_name(int epoch) {
  std::string digits = std::to_string(epoch);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "epoch_" + digits + ".ckpt";
}

SeedRun train_one_seed(const RunManifest& manifest, const DtdConfig& base, std::uint64_t seed,
                       std::ostream* log, std::mutex& log_mutex) {
  DtdConfig config = base;
  config.seed = seed;

  SeedRun run;
  run.seed = seed;
  run.dir = manifest.output_dir / ("seed_" + std::to_string(seed));
  const fs::path ckpt_dir = run.dir / "checkpoints";
  fs::create_directories(ckpt_dir);

  std::ofstream metrics = open_out(run.dir / "metrics.csv");
  std::ofstream timing = open_out(run.dir / "timing.csv");
  metrics << kMetricsHeader << '\n';
  timing << "epoch,wall_time_s\n";

  DtdTrainer trainer(config);
  double best = -1.0;
  for (int e = 0; e < config.epochs; ++e) {
    EpochMetrics m = trainer.train_epoch();
    timing << m.epoch << ',' << num(m.wall_time_s) << '\n';
    if (!config.record_wall_time) m.wall_time_s = 0.0;
    metrics << format_metrics_row(m) << '\n' << std::flush;
    run.epochs.push_back(m);

    const bool last = e + 1 == config.epochs;
    const bool periodic = config.checkpoint_every > 0 && e % config.checkpoint_every == 0;
    if (e == 0 || periodic || last) {
      save_checkpoint(ckpt_dir / ckpt_name(e), config, trainer.agents(), e + 1);
    }
    if (m.success_rate >= best) {
      best = m.success_rate;
      run.best_epoch = e;
      save_checkpoint(ckpt_dir / "best.ckpt", config, trainer.agents(), e + 1);
    }
    if (last) save_checkpoint(ckpt_dir / "final.ckpt", config, trainer.agents(), e + 1);

    if (log) {
      std::lock_guard lock(log_mutex);
      *log << "seed " << seed << " epoch " << e << " success " << m.success_rate << '\n';
    }
  }
  return run;
}

}  // namespace

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::ddpg:
      return "ddpg";
    case Algorithm::her:
      return "her";
    case Algorithm::dtd:
      return "dtd";
  }
  return "dtd";
}

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "ddpg") return Algorithm::ddpg;
  if (name == "her") return Algorithm::her;
  if (name == "dtd") return Algorithm::dtd;
  throw ConfigError("algo", "unknown algorithm '" + std::string(name) + "' (ddpg, her, dtd)");
}

DtdConfig apply_preset(DtdConfig config, Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::ddpg:
      config.sub_episodes = 1;
      config.relabel_prob = 0.0;
      break;
    case Algorithm::her:
      config.sub_episodes = 1;
      if (config.relabel_prob == 0.0) config.relabel_prob = 0.8;
      break;
    case Algorithm::dtd:
      if (config.sub_episodes < 2) config.sub_episodes = default_config(config.env).sub_episodes;
      if (config.relabel_prob == 0.0) config.relabel_prob = 0.8;
      break;
  }
  config.validate();
  return config;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(first + static_cast<std::uint64_t>(i));
  return seeds;
}

std::string format_metrics_row(const EpochMetrics& m) {
  std::ostringstream row;
  row << m.epoch << ',' << m.episodes << ',' << m.env_steps << ',' << num(m.success_rate) << ','
      << num(m.low.critic_loss) << ',' << num(m.low.actor_loss) << ',' << num(m.high.critic_loss)
      << ',' << num(m.high.actor_loss) << ',' << num(m.low.mean_q) << ',' << num(m.high.mean_q)
      << ',' << num(m.wall_time_s);
  return row.str();
}

std::vector<SeedRun> run_train(const RunManifest& manifest, std::ostream* log) {
  if (manifest.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  const DtdConfig config = apply_preset(manifest.config, manifest.algorithm);

  try {
    fs::create_directories(manifest.output_dir);
  } catch (const fs::filesystem_error& e) {
    throw Error("cannot create output directory " + manifest.output_dir.string() + ": " +
                e.code().message());
  }
  {
    std::ofstream out = open_out(manifest.output_dir / "manifest.txt");
    out << "# tool_version: " << manifest.tool_version << '\n'
        << "# algorithm: " << to_string(manifest.algorithm) << '\n'
        << "# seeds:";
    for (auto s : manifest.seeds) out << ' ' << s;
    out << '\n' << serialize_config(config);
  }

  std::vector<SeedRun> runs(manifest.seeds.size());
  std::mutex log_mutex;
  const int jobs = std::clamp(manifest.jobs, 1, static_cast<int>(manifest.seeds.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < runs.size(); ++i) {
      runs[i] = train_one_seed(manifest, config, manifest.seeds[i], log, log_mutex);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(runs.size());
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < runs.size(); i = next++) {
          try {
            runs[i] = train_one_seed(manifest, config, manifest.seeds[i], log, log_mutex);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::ofstream agg = open_out(manifest.output_dir / "aggregate.csv");
  agg << "epoch,success_median,success_p25,success_p75\n";
  for (const AggregateRow& r : aggregate_success(runs)) {
    agg << r.epoch << ',' << num(r.median) << ',' << num(r.p25) << ',' << num(r.p75) << '\n';
  }
  return runs;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<AggregateRow> aggregate_success(const std::vector<SeedRun>& runs) {
  std::vector<AggregateRow> rows;
  if (runs.empty()) return rows;
  std::size_t epochs = runs.front().epochs.size();
  for (const SeedRun& r : runs) epochs = std::min(epochs, r.epochs.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    std::vector<double> s;
    for (const SeedRun& r : runs) s.push_back(r.epochs[e].success_rate);
    rows.push_back({static_cast<int>(e), percentile(s, 0.5), percentile(s, 0.25),
                    percentile(s, 0.75)});
  }
  return rows;
}

Heatmap compute_heatmap(const Checkpoint& ckpt, std::string_view scenario, int resolution) {
  if (resolution < 2) throw ConfigError("resolution", "heatmap resolution must be at least 2");
  auto env = make_env(ckpt.config.env);
  const EnvSpec& spec = env->spec();
  check_compatible(ckpt, spec);
  if (spec.goal_dim < 2) {
    throw ScenarioError("heatmap needs a planar goal space; '" + spec.name + "' has none");
  }
  const ResetResult start = env->reset_scenario(scenario);

  Heatmap map;
  map.start = start.achieved_goal;
  map.goal = start.goal;
  const auto n = static_cast<Eigen::Index>(resolution) * resolution;
  Mat inputs(spec.observation_dim + spec.goal_dim, n);
  Mat subgoals(spec.goal_dim, n);
  const double wx = (spec.goal_high[0] - spec.goal_low[0]) / resolution;
  const double wy = (spec.goal_high[1] - spec.goal_low[1]) / resolution;
  for (int iy = 0; iy < resolution; ++iy) {
    for (int ix = 0; ix < resolution; ++ix) {
      const Eigen::Index c = static_cast<Eigen::Index>(iy) * resolution + ix;
      inputs.col(c) << start.observation, start.goal;
      // Dimensions beyond the plane keep the goal's value.
      subgoals.col(c) = start.goal;
      subgoals(0, c) = spec.goal_low[0] + (ix + 0.5) * wx;
      subgoals(1, c) = spec.goal_low[1] + (iy + 0.5) * wy;
    }
  }
  const Vec q = ckpt.agents.high.q_values(inputs, subgoals);

  map.cells.resize(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < n; ++c) {
    map.cells[static_cast<std::size_t>(c)] = {subgoals(0, c), subgoals(1, c), q[c]};
  }
  Eigen::Index argmax = 0;
  map.max = q.maxCoeff(&argmax);
  map.min = q.minCoeff();
  map.argmax = static_cast<std::size_t>(argmax);
  if (!std::isfinite(map.min) || !std::isfinite(map.max)) {
    throw NumericError("heatmap: non-finite critic values");
  }
  return map;
}

void write_heatmap_csv(const fs::path& path, const Heatmap& map) {
  std::ofstream out = open_out(path);
  out << "x,y,q\n";
  for (const HeatmapCell& c : map.cells) out << num(c.x) << ',' << num(c.y) << ',' << num(c.q) << '\n';
  const HeatmapCell& best = map.cells[map.argmax];
  out << "# summary min=" << num(map.min) << " max=" << num(map.max) << " argmax=" << num(best.x)
      << ',' << num(best.y) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

EvalResult run_eval(const Checkpoint& ckpt, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("episodes", "need at least one episode");
  auto env = make_env(ckpt.config.env);
  check_compatible(ckpt, env->spec());
  return evaluate(*env, ckpt.agents, ckpt.config, episodes, seed);
}

void write_eval_csv(const fs::path& path, const EvalResult& result) {
  std::ofstream out = open_out(path);
  out << "episode,seed,success,cumulative_reward\n";
  for (std::size_t i = 0; i < result.episodes.size(); ++i) {
    const EpisodeResult& e = result.episodes[i];
    out << i << ',' << e.seed << ',' << (e.success ? 1 : 0) << ',' << num(e.cumulative_reward)
        << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

std::string format_eval_report(const EvalResult& result) {
  std::ostringstream out;
  out << "episodes: " << result.episodes.size() << '\n'
      << "success_rate: " << num(result.success_rate) << '\n'
      << "mean_cumulative_reward: " << num(result.mean_return) << '\n';
  return out.str();
}

}  // namespace dtd
