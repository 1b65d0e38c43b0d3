#pragma once

#include "dtd/env.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <random>
#include <vector>

namespace dtd {

/// One low-level environment step, stored with the sub-goal that was active.
struct Transition {
  Vec obs;
  Vec next_obs;
  Vec achieved;
  Vec next_achieved;
  Vec subgoal;
  Vec action;
  double reward = -1.0;  // against `subgoal`
  Vec episode_goal;
  int step_index = 0;
  int sub_episode_index = 0;
};

/// One sub-episode seen from the high-level policy: the sub-goal is its action.
struct HighTransition {
  Vec obs;
  Vec subgoal_action;
  Vec next_obs;
  Vec next_achieved;
  Vec episode_goal;
  double reward = -1.0;  // against `episode_goal`
  int sub_episode_index = 0;
};

struct EpisodeTrace {
  std::vector<Transition> transitions;
  std::vector<HighTransition> high_transitions;
  Vec episode_goal;
  bool success = false;
  /// Achieved goal at reset; boundary 0 of the episode.
  Vec initial_achieved;
};

/// Throws ReplayError describing the first violated trace invariant.
void validate_trace(const EnvSpec& spec, const EpisodeTrace& trace);

/// Where a sampled item came from; kept so relabeling can be audited.
struct SampleOrigin {
  std::size_t episode = 0;  // index into the buffer, oldest first
  int index = 0;            // step (low) or sub-episode (high) index
  bool relabeled = false;
  int source_index = -1;  // future boundary whose achieved goal was used
};

/// Training batch; every matrix has one column per item.
struct Batch {
  Mat inputs;       // obs || goal
  Mat actions;      // env action (low) or sub-goal (high)
  Vec rewards;
  Mat next_inputs;  // next_obs || goal
  Vec done;
  Mat goals;          // effective goal per item
  Mat next_achieved;  // for reward audits
  std::vector<SampleOrigin> origins;

  int size() const { return static_cast<int>(rewards.size()); }
};

/// Episodic ring buffer with hindsight relabeling ("future" strategy) at both
/// levels of the hierarchy.
class ReplayBuffer {
 public:
  ReplayBuffer(EnvSpec spec, std::size_t capacity);

  void store_episode(EpisodeTrace trace);

  /// Low-level batch: with probability `relabel_prob` an item's sub-goal is
  /// replaced by the achieved goal of a uniformly drawn later step.
  Batch sample_low(int batch_size, double relabel_prob, std::mt19937_64& rng);

  /// High-level batch at sub-episode granularity; relabeled goals come from
  /// later sub-episode boundaries.
  Batch sample_high(int batch_size, double relabel_prob, std::mt19937_64& rng);

  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return episodes_.empty(); }
  std::uint64_t total_stored() const { return total_stored_; }
  std::uint64_t relabel_count() const { return relabel_count_; }
  const EpisodeTrace& episode(std::size_t i) const { return episodes_.at(i); }
  const EnvSpec& spec() const { return spec_; }

 private:
  EnvSpec spec_;
  std::size_t capacity_;
  std::deque<EpisodeTrace> episodes_;
  std::uint64_t total_stored_ = 0;
  std::uint64_t relabel_count_ = 0;
};

/// Achieved goal at low-level boundary k (k = 0 is the reset state, k = T the end).
const Vec& achieved_at_step(const EpisodeTrace& trace, int k);
/// Achieved goal at sub-episode boundary k (k = 0 is the reset state, k = N the end).
const Vec& achieved_at_boundary(const EpisodeTrace& trace, int k);

}  // namespace dtd
