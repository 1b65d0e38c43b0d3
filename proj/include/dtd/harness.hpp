#pragma once

#include "dtd/checkpoint.hpp"
#include "dtd/controller.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dtd {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum class Algorithm { ddpg, her, dtd };

std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view name);

/// ddpg: one sub-episode, no relabeling. her: one sub-episode, relabeling.
/// dtd: relabeling and at least two sub-episodes (the env default if the
/// config asks for fewer).
DtdConfig apply_preset(DtdConfig config, Algorithm algorithm);

struct RunManifest {
  DtdConfig config;
  Algorithm algorithm = Algorithm::dtd;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  std::string tool_version{kToolVersion};
  int jobs = 1;  // seeds trained concurrently
};

/// config.seed, config.seed + 1, ...
std::vector<std::uint64_t> seed_range(std::uint64_t first, int count);

inline constexpr std::string_view kMetricsHeader =
    "epoch,episodes,env_steps,success_rate,critic_loss_low,actor_loss_low,critic_loss_high,"
    "actor_loss_high,mean_q_low,mean_q_high,wall_time_s";

std::string format_metrics_row(const EpochMetrics& m);

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  int best_epoch = 0;
  std::filesystem::path dir;
};

/// Per seed, under output_dir/seed_<s>/: metrics.csv, timing.csv and
/// checkpoints/ (epoch_NNNN.ckpt after the first epoch, every
/// checkpoint_every epochs and after the last one, plus best.ckpt and
/// final.ckpt). output_dir/aggregate.csv holds per-epoch median and quartiles
/// of success across seeds; output_dir/manifest.txt records the run.
std::vector<SeedRun> run_train(const RunManifest& manifest, std::ostream* log = nullptr);

/// Linear interpolation between order statistics (p in [0, 1]).
double percentile(std::vector<double> values, double p);

struct AggregateRow {
  int epoch = 0;
  double median = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
};
std::vector<AggregateRow> aggregate_success(const std::vector<SeedRun>& runs);

struct HeatmapCell {
  double x = 0.0;
  double y = 0.0;
  double q = 0.0;
};

struct Heatmap {
  std::vector<HeatmapCell> cells;  // row-major, x varies fastest
  double min = 0.0;
  double max = 0.0;
  std::size_t argmax = 0;
  Vec start;  // achieved goal at the scenario's start
  Vec goal;

  double spread() const { return max - min; }
};

/// High-level critic over sub-goals at grid cell centres spanning the goal
/// bounds, with the environment placed in the named scenario.
Heatmap compute_heatmap(const Checkpoint& ckpt, std::string_view scenario, int resolution);
void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& map);

/// Deterministic noise-free evaluation on seeds {seed, seed + 1, ...}.
EvalResult run_eval(const Checkpoint& ckpt, int episodes, std::uint64_t seed);
void write_eval_csv(const std::filesystem::path& path, const EvalResult& result);
std::string format_eval_report(const EvalResult& result);

}  // namespace dtd
