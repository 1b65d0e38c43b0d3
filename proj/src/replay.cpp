#include "dtd/replay.hpp"

#include "dtd/errors.hpp"

#include <string>

namespace dtd {

namespace {

Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

int draw_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace

const Vec& achieved_at_step(const EpisodeTrace& trace, int k) {
  return k == 0 ? trace.initial_achieved : trace.transitions.at(k - 1).next_achieved;
}

const Vec& achieved_at_boundary(const EpisodeTrace& trace, int k) {
  return k == 0 ? trace.initial_achieved : trace.high_transitions.at(k - 1).next_achieved;
}

void validate_trace(const EnvSpec& spec, const EpisodeTrace& trace) {
  const int T = static_cast<int>(trace.transitions.size());
  const int N = static_cast<int>(trace.high_transitions.size());
  if (T == 0 || N == 0) throw ReplayError("trace has no transitions");
  if (T % N != 0) {
    throw ReplayError("trace length " + std::to_string(T) + " is not divisible into " +
                      std::to_string(N) + " sub-episodes");
  }
  if (trace.episode_goal.size() != spec.goal_dim || trace.initial_achieved.size() != spec.goal_dim) {
    throw ReplayError("trace goal has wrong dimension");
  }
  const int len = T / N;
  for (int t = 0; t < T; ++t) {
    const Transition& tr = trace.transitions[t];
    if (tr.step_index != t || tr.sub_episode_index != t / len) {
      throw ReplayError("transition " + std::to_string(t) + " has inconsistent indices");
    }
    if (tr.obs.size() != spec.observation_dim || tr.next_obs.size() != spec.observation_dim ||
        tr.action.size() != spec.action_dim || tr.subgoal.size() != spec.goal_dim ||
        tr.next_achieved.size() != spec.goal_dim || tr.achieved.size() != spec.goal_dim) {
      throw ReplayError("transition " + std::to_string(t) + " has wrong dimensions");
    }
    if (tr.reward != compute_reward(spec, tr.next_achieved, tr.subgoal)) {
      throw ReplayError("transition " + std::to_string(t) + " reward disagrees with its sub-goal");
    }
  }
  for (int n = 0; n < N; ++n) {
    const HighTransition& h = trace.high_transitions[n];
    if (h.sub_episode_index != n) throw ReplayError("high transition indices out of order");
    if (h.obs.size() != spec.observation_dim || h.next_obs.size() != spec.observation_dim ||
        h.subgoal_action.size() != spec.goal_dim || h.next_achieved.size() != spec.goal_dim) {
      throw ReplayError("high transition " + std::to_string(n) + " has wrong dimensions");
    }
    if (h.episode_goal != trace.episode_goal ||
        h.reward != compute_reward(spec, h.next_achieved, trace.episode_goal)) {
      throw ReplayError("high transition " + std::to_string(n) +
                        " reward disagrees with the episode goal");
    }
    if (h.next_achieved != trace.transitions[(n + 1) * len - 1].next_achieved) {
      throw ReplayError("high transition " + std::to_string(n) +
                        " does not end where its sub-episode ends");
    }
    for (int t = n * len; t < (n + 1) * len; ++t) {
      if (trace.transitions[t].subgoal != h.subgoal_action) {
        throw ReplayError("sub-goal changes inside sub-episode " + std::to_string(n));
      }
    }
  }
  if (trace.high_transitions.back().subgoal_action != trace.episode_goal) {
    throw ReplayError("final sub-goal must equal the episode goal");
  }
}

ReplayBuffer::ReplayBuffer(EnvSpec spec, std::size_t capacity)
    : spec_(std::move(spec)), capacity_(capacity) {
  if (capacity_ == 0) throw ReplayError("replay capacity must be positive");
}

void ReplayBuffer::store_episode(EpisodeTrace trace) {
  validate_trace(spec_, trace);
  episodes_.push_back(std::move(trace));
  ++total_stored_;
  while (episodes_.size() > capacity_) episodes_.pop_front();
}

Batch ReplayBuffer::sample_low(int batch_size, double relabel_prob, std::mt19937_64& rng) {
  if (episodes_.empty()) throw ReplayError("cannot sample from an empty buffer");
  const int in_dim = spec_.observation_dim + spec_.goal_dim;
  Batch b;
  b.inputs.resize(in_dim, batch_size);
  b.next_inputs.resize(in_dim, batch_size);
  b.actions.resize(spec_.action_dim, batch_size);
  b.rewards.resize(batch_size);
  b.done = Vec::Zero(batch_size);
  b.goals.resize(spec_.goal_dim, batch_size);
  b.next_achieved.resize(spec_.goal_dim, batch_size);
  b.origins.resize(batch_size);
  std::bernoulli_distribution relabel(relabel_prob);

  for (int i = 0; i < batch_size; ++i) {
    const std::size_t e = draw_index(rng, episodes_.size());
    const EpisodeTrace& trace = episodes_[e];
    const int T = static_cast<int>(trace.transitions.size());
    const int t = draw_int(rng, 0, T - 1);
    const Transition& tr = trace.transitions[t];

    SampleOrigin origin{e, t, false, -1};
    Vec goal = tr.subgoal;
    double reward = tr.reward;
    if (relabel(rng)) {
      const int future = draw_int(rng, t + 1, T);
      goal = achieved_at_step(trace, future);
      reward = compute_reward(spec_, tr.next_achieved, goal);
      origin.relabeled = true;
      origin.source_index = future;
      ++relabel_count_;
    }
    b.inputs.col(i) = concat(tr.obs, goal);
    b.next_inputs.col(i) = concat(tr.next_obs, goal);
    b.actions.col(i) = tr.action;
    b.rewards[i] = reward;
    b.goals.col(i) = goal;
    b.next_achieved.col(i) = tr.next_achieved;
    b.origins[i] = origin;
  }
  return b;
}

Batch ReplayBuffer::sample_high(int batch_size, double relabel_prob, std::mt19937_64& rng) {
  if (episodes_.empty()) throw ReplayError("cannot sample from an empty buffer");
  const int in_dim = spec_.observation_dim + spec_.goal_dim;
  Batch b;
  b.inputs.resize(in_dim, batch_size);
  b.next_inputs.resize(in_dim, batch_size);
  b.actions.resize(spec_.goal_dim, batch_size);
  b.rewards.resize(batch_size);
  b.done = Vec::Zero(batch_size);
  b.goals.resize(spec_.goal_dim, batch_size);
  b.next_achieved.resize(spec_.goal_dim, batch_size);
  b.origins.resize(batch_size);
  std::bernoulli_distribution relabel(relabel_prob);

  for (int i = 0; i < batch_size; ++i) {
    const std::size_t e = draw_index(rng, episodes_.size());
    const EpisodeTrace& trace = episodes_[e];
    const int N = static_cast<int>(trace.high_transitions.size());
    const int n = draw_int(rng, 0, N - 1);
    const HighTransition& h = trace.high_transitions[n];

    SampleOrigin origin{e, n, false, -1};
    Vec goal = h.episode_goal;
    double reward = h.reward;
    if (relabel(rng)) {
      const int future = draw_int(rng, n + 1, N);
      goal = achieved_at_boundary(trace, future);
      reward = compute_reward(spec_, h.next_achieved, goal);
      origin.relabeled = true;
      origin.source_index = future;
      ++relabel_count_;
    }
    b.inputs.col(i) = concat(h.obs, goal);
    b.next_inputs.col(i) = concat(h.next_obs, goal);
    b.actions.col(i) = h.subgoal_action;
    b.rewards[i] = reward;
    b.goals.col(i) = goal;
    b.next_achieved.col(i) = h.next_achieved;
    b.origins[i] = origin;
  }
  return b;
}

}  // namespace dtd
