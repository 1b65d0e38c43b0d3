#pragma once

#include "dtd/ddpg.hpp"
#include "dtd/env.hpp"
#include "dtd/replay.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace dtd {

/// Probability of proposing a sub-goal as a Gaussian perturbation of the
/// achieved goal instead of asking the high-level actor. Decays linearly from
/// eps_start to eps_end over anneal_epochs.
struct SubgoalSchedule {
  double sigma = 0.1;
  double eps_start = 1.0;
  double eps_end = 0.2;
  int anneal_epochs = 50;

  double epsilon(int epoch) const;
  friend bool operator==(const SubgoalSchedule&, const SubgoalSchedule&) = default;
};

struct DtdConfig {
  std::string env = "planar-push";
  int epochs = 100;
  int episodes_per_epoch = 50;
  int sub_episodes = 2;
  int horizon = 50;
  int trainings_per_epoch = 40;
  int batch_size = 1024;
  double relabel_prob = 0.8;
  SubgoalSchedule schedule;
  DdpgConfig low;
  DdpgConfig high;
  int buffer_capacity = 10000;
  int eval_episodes = 10;
  std::uint64_t seed = 0;
  int checkpoint_every = 1;
  bool record_wall_time = false;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  int sub_episode_length() const { return horizon / sub_episodes; }

  friend bool operator==(const DtdConfig&, const DtdConfig&) = default;
};

/// Defaults that depend on the environment (sub-episode count, perturbation scale).
DtdConfig default_config(const std::string& env = "planar-push");

struct Agents {
  DdpgAgent low;
  DdpgAgent high;
};

Agents make_agents(const EnvSpec& spec, const DtdConfig& config);

struct EpochMetrics {
  int epoch = 0;
  std::uint64_t episodes = 0;   // cumulative exploration episodes
  std::uint64_t env_steps = 0;  // cumulative exploration steps
  double success_rate = 0.0;
  double mean_return = 0.0;
  TrainStats low;
  TrainStats high;
  double wall_time_s = 0.0;
};

struct SubgoalContext {
  const EnvSpec& spec;
  const SubgoalSchedule& schedule;
  int epoch = 0;
  int sub_episodes = 1;
  bool explore = true;
};

/// Picks the sub-goal for sub-episode n. The last sub-goal is always the
/// episode goal; earlier ones are perturbations of the achieved goal with
/// probability epsilon(epoch) while exploring, otherwise the high-level actor.
Vec select_subgoal(const DdpgAgent& high, const SubgoalContext& ctx, int n, const Vec& obs,
                   const Vec& achieved, const Vec& goal, std::mt19937_64& rng);

/// One episode of T steps split into N sub-episodes.
EpisodeTrace run_episode(Environment& env, const Agents& agents, const DtdConfig& config,
                         int epoch, std::mt19937_64& rng, bool explore);

struct EpisodeResult {
  std::uint64_t seed = 0;
  bool success = false;
  double cumulative_reward = 0.0;
};

struct EvalResult {
  double success_rate = 0.0;
  double mean_return = 0.0;
  std::vector<EpisodeResult> episodes;
};

/// Noise-free episodes on the seed set {seed, seed + 1, ...}.
EvalResult evaluate(Environment& env, const Agents& agents, const DtdConfig& config,
                    int n_episodes, std::uint64_t seed);

/// Seed of the evaluation set used after each training epoch.
std::uint64_t eval_seed_base(const DtdConfig& config);

/// Collects episodes_per_epoch exploratory episodes, runs trainings_per_epoch
/// updates of both levels, then evaluates.
EpochMetrics train_epoch(Environment& env, Agents& agents, ReplayBuffer& buffer,
                         const DtdConfig& config, int epoch, std::mt19937_64& rng);

/// Owns everything one training run needs.
class DtdTrainer {
 public:
  explicit DtdTrainer(DtdConfig config);

  EpochMetrics train_epoch();

  const DtdConfig& config() const { return config_; }
  Environment& env() { return *env_; }
  const Agents& agents() const { return agents_; }
  Agents& agents() { return agents_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  int epochs_done() const { return epoch_; }
  std::uint64_t episodes() const { return episodes_; }

 private:
  DtdConfig config_;
  std::unique_ptr<Environment> env_;
  Agents agents_;
  ReplayBuffer buffer_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  std::uint64_t episodes_ = 0;
};

}  // namespace dtd
