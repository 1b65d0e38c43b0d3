#include "dtd/controller.hpp"

#include "dtd/errors.hpp"

#include <algorithm>
#include <chrono>

namespace dtd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void accumulate(TrainStats& acc, const TrainStats& s) {
  acc.critic_loss += s.critic_loss;
  acc.actor_loss += s.actor_loss;
  acc.mean_q += s.mean_q;
}

void scale(TrainStats& s, double f) {
  s.critic_loss *= f;
  s.actor_loss *= f;
  s.mean_q *= f;
}

}  // namespace

double SubgoalSchedule::epsilon(int epoch) const {
  if (anneal_epochs <= 0) return eps_end;
  const double frac = std::clamp(static_cast<double>(epoch) / anneal_epochs, 0.0, 1.0);
  return eps_start + (eps_end - eps_start) * frac;
}

void DtdConfig::validate() const {
  auto positive = [](const char* key, long long v) {
    if (v <= 0) throw ConfigError(key, "must be positive");
  };
  auto probability = [](const char* key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, "must lie in [0, 1]");
  };
  env_spec(env);  // unknown names throw
  positive("epochs", epochs);
  positive("episodes_per_epoch", episodes_per_epoch);
  positive("sub_episodes", sub_episodes);
  positive("horizon", horizon);
  if (trainings_per_epoch < 0) throw ConfigError("trainings_per_epoch", "must be non-negative");
  positive("batch_size", batch_size);
  positive("buffer_capacity", buffer_capacity);
  positive("eval_episodes", eval_episodes);
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every", "must be non-negative");
  if (horizon % sub_episodes != 0) {
    throw ConfigError("sub_episodes", "horizon " + std::to_string(horizon) +
                                          " is not divisible by sub_episodes " +
                                          std::to_string(sub_episodes));
  }
  probability("relabel_prob", relabel_prob);
  if (!(schedule.sigma > 0.0)) throw ConfigError("sigma", "must be positive");
  probability("eps_start", schedule.eps_start);
  probability("eps_end", schedule.eps_end);
  if (schedule.eps_end > schedule.eps_start) {
    throw ConfigError("eps_end", "must not exceed eps_start");
  }
  if (schedule.anneal_epochs < 0) throw ConfigError("anneal_epochs", "must be non-negative");
  for (const auto& [prefix, c] : {std::pair{"low_", &low}, std::pair{"high_", &high}}) {
    const std::string p = prefix;
    if (!(c->gamma > 0.0 && c->gamma < 1.0)) throw ConfigError(p + "gamma", "must lie in (0, 1)");
    if (!(c->tau >= 0.0 && c->tau <= 1.0)) throw ConfigError(p + "tau", "must lie in [0, 1]");
    if (!(c->actor_lr > 0.0)) throw ConfigError(p + "actor_lr", "must be positive");
    if (!(c->critic_lr > 0.0)) throw ConfigError(p + "critic_lr", "must be positive");
    if (!(c->explore_eps >= 0.0 && c->explore_eps <= 1.0)) {
      throw ConfigError(p + "explore_eps", "must lie in [0, 1]");
    }
    if (!(c->explore_noise_std >= 0.0)) throw ConfigError(p + "explore_noise_std", "must be >= 0");
    if (!(c->action_l2 >= 0.0)) throw ConfigError(p + "action_l2", "must be >= 0");
    if (c->hidden_layers.empty()) throw ConfigError(p + "hidden_layers", "must not be empty");
    for (int w : c->hidden_layers) {
      if (w < 1) throw ConfigError(p + "hidden_layers", "widths must be positive");
    }
  }
}

DtdConfig default_config(const std::string& env) {
  DtdConfig c;
  c.env = env;
  if (env == "block-rotate") {
    c.sub_episodes = 4;
    c.horizon = 48;  // divisible by 4
    c.schedule.sigma = 0.5;
  }
  return c;
}

Agents make_agents(const EnvSpec& spec, const DtdConfig& config) {
  return Agents{
      DdpgAgent(spec.observation_dim, spec.goal_dim, spec.action_low, spec.action_high, config.low,
                splitmix64(config.seed * 2 + 1)),
      DdpgAgent(spec.observation_dim, spec.goal_dim, spec.goal_low, spec.goal_high, config.high,
                splitmix64(config.seed * 2 + 2)),
  };
}

Vec select_subgoal(const DdpgAgent& high, const SubgoalContext& ctx, int n, const Vec& obs,
                   const Vec& achieved, const Vec& goal, std::mt19937_64& rng) {
  if (n < 0 || n >= ctx.sub_episodes) throw Error("select_subgoal: sub-episode index out of range");
  if (n == ctx.sub_episodes - 1) return goal;
  if (!ctx.explore) return contain_goal(ctx.spec, high.act(obs, goal, false, rng));

  if (std::bernoulli_distribution(ctx.schedule.epsilon(ctx.epoch))(rng)) {
    std::normal_distribution<double> noise(0.0, ctx.schedule.sigma);
    Vec sg = achieved;
    for (Eigen::Index i = 0; i < sg.size(); ++i) sg[i] += noise(rng);
    return contain_goal(ctx.spec, sg);
  }
  return contain_goal(ctx.spec, high.act(obs, goal, true, rng));
}

EpisodeTrace run_episode(Environment& env, const Agents& agents, const DtdConfig& config,
                         int epoch, std::mt19937_64& rng, bool explore) {
  const EnvSpec& spec = env.spec();
  const int N = config.sub_episodes;
  const int len = config.sub_episode_length();
  const SubgoalContext ctx{spec, config.schedule, epoch, N, explore};

  const ResetResult start = env.reset(rng());
  EpisodeTrace trace;
  trace.episode_goal = start.goal;
  trace.initial_achieved = start.achieved_goal;
  trace.transitions.reserve(static_cast<std::size_t>(config.horizon));
  trace.high_transitions.reserve(static_cast<std::size_t>(N));

  Vec obs = start.observation;
  Vec achieved = start.achieved_goal;
  for (int n = 0; n < N; ++n) {
    const Vec sg = select_subgoal(agents.high, ctx, n, obs, achieved, start.goal, rng);
    HighTransition high;
    high.obs = obs;
    high.subgoal_action = sg;
    high.episode_goal = start.goal;
    high.sub_episode_index = n;
    for (int k = 0; k < len; ++k) {
      const Vec action = agents.low.act(obs, sg, explore, rng);
      EnvStepResult step = env.step(action);
      Transition tr;
      tr.obs = std::move(obs);
      tr.achieved = std::move(achieved);
      tr.next_obs = step.observation;
      tr.next_achieved = step.achieved_goal;
      tr.subgoal = sg;
      tr.action = action;
      tr.reward = compute_reward(spec, step.achieved_goal, sg);
      tr.episode_goal = start.goal;
      tr.step_index = n * len + k;
      tr.sub_episode_index = n;
      trace.transitions.push_back(std::move(tr));
      if (n == N - 1 && step.is_success) trace.success = true;
      obs = std::move(step.observation);
      achieved = std::move(step.achieved_goal);
    }
    high.next_obs = obs;
    high.next_achieved = achieved;
    high.reward = compute_reward(spec, achieved, start.goal);
    trace.high_transitions.push_back(std::move(high));
  }
  return trace;
}

EvalResult evaluate(Environment& env, const Agents& agents, const DtdConfig& config,
                    int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw Error("evaluate: need at least one episode");
  EvalResult result;
  double successes = 0.0;
  double returns = 0.0;
  for (int i = 0; i < n_episodes; ++i) {
    const std::uint64_t episode_seed = seed + static_cast<std::uint64_t>(i);
    std::mt19937_64 rng(episode_seed);
    const EpisodeTrace trace = run_episode(env, agents, config, 0, rng, false);
    EpisodeResult ep;
    ep.seed = episode_seed;
    ep.success = trace.success;
    for (const Transition& tr : trace.transitions) {
      ep.cumulative_reward += compute_reward(env.spec(), tr.next_achieved, trace.episode_goal);
    }
    successes += ep.success ? 1.0 : 0.0;
    returns += ep.cumulative_reward;
    result.episodes.push_back(ep);
  }
  result.success_rate = successes / n_episodes;
  result.mean_return = returns / n_episodes;
  return result;
}

std::uint64_t eval_seed_base(const DtdConfig& config) { return splitmix64(config.seed) >> 1; }

EpochMetrics train_epoch(Environment& env, Agents& agents, ReplayBuffer& buffer,
                         const DtdConfig& config, int epoch, std::mt19937_64& rng) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool hierarchical = config.sub_episodes > 1;
  const int obs_dim = env.spec().observation_dim;

  for (int m = 0; m < config.episodes_per_epoch; ++m) {
    EpisodeTrace trace = run_episode(env, agents, config, epoch, rng, true);

    Mat low_inputs(agents.low.input_dim(), static_cast<Eigen::Index>(trace.transitions.size()));
    for (std::size_t t = 0; t < trace.transitions.size(); ++t) {
      low_inputs.col(static_cast<Eigen::Index>(t)) << trace.transitions[t].obs,
          trace.transitions[t].subgoal;
    }
    agents.low.normalizer_update(low_inputs);
    if (hierarchical) {
      Mat high_inputs(agents.high.input_dim(),
                      static_cast<Eigen::Index>(trace.high_transitions.size()));
      for (std::size_t n = 0; n < trace.high_transitions.size(); ++n) {
        high_inputs.col(static_cast<Eigen::Index>(n)).head(obs_dim) = trace.high_transitions[n].obs;
        high_inputs.col(static_cast<Eigen::Index>(n)).tail(env.spec().goal_dim) =
            trace.episode_goal;
      }
      agents.high.normalizer_update(high_inputs);
    }
    buffer.store_episode(std::move(trace));
  }

  EpochMetrics metrics;
  metrics.epoch = epoch;
  for (int k = 0; k < config.trainings_per_epoch; ++k) {
    const Batch low_batch = buffer.sample_low(config.batch_size, config.relabel_prob, rng);
    accumulate(metrics.low, agents.low.train_batch(low_batch));
    if (hierarchical) {
      const Batch high_batch = buffer.sample_high(config.batch_size, config.relabel_prob, rng);
      accumulate(metrics.high, agents.high.train_batch(high_batch));
    }
    agents.low.update_targets();
    if (hierarchical) agents.high.update_targets();
  }
  if (config.trainings_per_epoch > 0) {
    scale(metrics.low, 1.0 / config.trainings_per_epoch);
    scale(metrics.high, 1.0 / config.trainings_per_epoch);
  }

  const EvalResult eval = evaluate(env, agents, config, config.eval_episodes, eval_seed_base(config));
  metrics.success_rate = eval.success_rate;
  metrics.mean_return = eval.mean_return;
  metrics.episodes = buffer.total_stored();
  metrics.env_steps = buffer.total_stored() * static_cast<std::uint64_t>(config.horizon);
  metrics.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return metrics;
}

DtdTrainer::DtdTrainer(DtdConfig config)
    : config_(std::move(config)),
      env_((config_.validate(), make_env(config_.env))),
      agents_(make_agents(env_->spec(), config_)),
      buffer_(env_->spec(), static_cast<std::size_t>(config_.buffer_capacity)),
      rng_(splitmix64(config_.seed ^ 0x5bd1e995ULL)) {}

EpochMetrics DtdTrainer::train_epoch() {
  EpochMetrics m = dtd::train_epoch(*env_, agents_, buffer_, config_, epoch_, rng_);
  ++epoch_;
  episodes_ = buffer_.total_stored();
  return m;
}

}  // namespace dtd
