#include "oracles.hpp"

#include "dtd/errors.hpp"
#include "dtd/replay.hpp"

#include <doctest.h>

#include <random>
#include <map>
#include <set>

using namespace dtd;

namespace {

const EnvSpec kPush = env_spec("planar-push");

// A valid push trace of T steps in N sub-episodes whose block moves along a
// straight line, so every achieved goal is distinct. `tag` offsets the line.
EpisodeTrace line_trace(int T, int N, double tag = 0.0, Vec goal = Vec()) {
  if (goal.size() == 0) {
    goal = Vec(2);
    goal << 0.85, 0.85;
  }
  auto ag = [tag](int k) {
    Vec a(2);
    a << 0.1 + 0.01 * k + tag, 0.2 + 0.003 * k;
    return a;
  };
  auto obs = [&](int k) {
    Vec o(6);
    o << 0.1, 0.1, ag(k), ag(k) - Vec::Constant(2, 0.1);
    return o;
  };
  const int len = T / N;
  EpisodeTrace tr;
  tr.episode_goal = goal;
  tr.initial_achieved = ag(0);
  for (int n = 0; n < N; ++n) {
    Vec sg = (n == N - 1) ? goal : ag(n * len + 3);
    HighTransition h;
    h.obs = obs(n * len);
    h.subgoal_action = sg;
    h.next_obs = obs((n + 1) * len);
    h.next_achieved = ag((n + 1) * len);
    h.episode_goal = goal;
    h.reward = compute_reward(kPush, h.next_achieved, goal);
    h.sub_episode_index = n;
    tr.high_transitions.push_back(h);
    for (int t = n * len; t < (n + 1) * len; ++t) {
      Transition x;
      x.obs = obs(t);
      x.next_obs = obs(t + 1);
      x.achieved = ag(t);
      x.next_achieved = ag(t + 1);
      x.subgoal = sg;
      x.action = Vec::Zero(2);
      x.reward = compute_reward(kPush, x.next_achieved, sg);
      x.episode_goal = goal;
      x.step_index = t;
      x.sub_episode_index = n;
      tr.transitions.push_back(x);
    }
  }
  return tr;
}

}  // namespace

TEST_SUITE("replay") {

TEST_CASE("store grows the buffer and evicts oldest first") {
  ReplayBuffer buf(kPush, 2);
  CHECK(buf.empty());
  buf.store_episode(line_trace(10, 2, 0.0));
  CHECK(buf.size() == 1);
  buf.store_episode(line_trace(10, 2, 0.1));
  buf.store_episode(line_trace(10, 2, 0.2));
  CHECK(buf.size() == 2);
  CHECK(buf.total_stored() == 3);
  CHECK(buf.episode(0).initial_achieved[0] == doctest::Approx(0.2));
  CHECK(buf.episode(1).initial_achieved[0] == doctest::Approx(0.3));
}

TEST_CASE("ring keeps exactly the last c episodes") {
  const std::size_t c = 5;
  ReplayBuffer buf(kPush, c);
  for (int i = 0; i < 12; ++i) buf.store_episode(line_trace(4, 2, 0.01 * i));
  CHECK(buf.size() == c);
  for (std::size_t i = 0; i < c; ++i) {
    CHECK(buf.episode(i).initial_achieved[0] == doctest::Approx(0.1 + 0.01 * (7 + static_cast<int>(i))));
  }
}

TEST_CASE("malformed traces are rejected") {
  ReplayBuffer buf(kPush, 10);
  EpisodeTrace unforced = line_trace(10, 2);
  unforced.high_transitions.back().subgoal_action = Vec::Constant(2, 0.5);
  for (int t = 5; t < 10; ++t) {
    unforced.transitions[t].subgoal = Vec::Constant(2, 0.5);
    unforced.transitions[t].reward =
        compute_reward(kPush, unforced.transitions[t].next_achieved, unforced.transitions[t].subgoal);
  }
  CHECK_THROWS_AS(buf.store_episode(unforced), ReplayError);

  EpisodeTrace short_trace = line_trace(10, 2);
  short_trace.transitions.pop_back();
  CHECK_THROWS_AS(buf.store_episode(short_trace), ReplayError);

  EpisodeTrace bad_reward = line_trace(10, 2);
  bad_reward.transitions[3].reward = bad_reward.transitions[3].reward == 0.0 ? -1.0 : 0.0;
  CHECK_THROWS_AS(buf.store_episode(bad_reward), ReplayError);
  CHECK(buf.empty());
}

TEST_CASE("empty buffer cannot be sampled") {
  ReplayBuffer buf(kPush, 10);
  std::mt19937_64 rng(0);
  CHECK_THROWS_AS(buf.sample_low(4, 0.5, rng), ReplayError);
  CHECK_THROWS_AS(buf.sample_high(4, 0.5, rng), ReplayError);
}

TEST_CASE("K=0 returns stored goals and rewards") {
  ReplayBuffer buf(kPush, 10);
  buf.store_episode(line_trace(10, 5));
  std::mt19937_64 rng(1);
  const Batch low = buf.sample_low(200, 0.0, rng);
  for (int i = 0; i < low.size(); ++i) {
    const Transition& t = buf.episode(low.origins[i].episode).transitions[low.origins[i].index];
    CHECK_FALSE(low.origins[i].relabeled);
    CHECK(Vec(low.goals.col(i)) == t.subgoal);
    CHECK(low.rewards[i] == t.reward);
    CHECK(Vec(low.inputs.col(i).head(6)) == t.obs);
    CHECK(Vec(low.actions.col(i)) == t.action);
  }
  const Batch high = buf.sample_high(200, 0.0, rng);
  for (int i = 0; i < high.size(); ++i) {
    const HighTransition& h = buf.episode(0).high_transitions[high.origins[i].index];
    CHECK(Vec(high.goals.col(i)) == h.episode_goal);
    CHECK(high.rewards[i] == h.reward);
    CHECK(Vec(high.actions.col(i)) == h.subgoal_action);
  }
  CHECK(buf.relabel_count() == 0);
  CHECK(low.done.isZero());
}

TEST_CASE("relabeled rewards match an independent recomputation") {
  ReplayBuffer buf(kPush, 10);
  for (int i = 0; i < 4; ++i) buf.store_episode(line_trace(10, 5, 0.02 * i));
  std::mt19937_64 rng(2);
  for (double K : {0.3, 0.8, 1.0}) {
    const Batch low = buf.sample_low(500, K, rng);
    for (int i = 0; i < low.size(); ++i) {
      const Vec goal = low.goals.col(i);
      CHECK(low.rewards[i] == oracle::reward(kPush, low.next_achieved.col(i), goal));
      CHECK(Vec(low.inputs.col(i).tail(2)) == goal);
      CHECK(Vec(low.next_inputs.col(i).tail(2)) == goal);
      if (low.origins[i].relabeled) {
        const EpisodeTrace& tr = buf.episode(low.origins[i].episode);
        CHECK(oracle::later_step_goal(tr, low.origins[i].index, goal));
      }
    }
    const Batch high = buf.sample_high(500, K, rng);
    for (int i = 0; i < high.size(); ++i) {
      const Vec goal = high.goals.col(i);
      CHECK(high.rewards[i] == oracle::reward(kPush, high.next_achieved.col(i), goal));
      if (high.origins[i].relabeled) {
        const EpisodeTrace& tr = buf.episode(high.origins[i].episode);
        CHECK(oracle::later_boundary_goal(tr, high.origins[i].index, goal));
      }
    }
  }
}

TEST_CASE("relabel with the item's own next achieved goal gives reward 0") {
  ReplayBuffer buf(kPush, 10);
  buf.store_episode(line_trace(10, 5));
  std::mt19937_64 rng(3);
  int hits = 0;
  const Batch low = buf.sample_low(2000, 1.0, rng);
  for (int i = 0; i < low.size(); ++i) {
    const auto& o = low.origins[i];
    if (o.source_index == o.index + 1) {
      ++hits;
      CHECK(low.rewards[i] == 0.0);
    }
  }
  CHECK(hits > 0);
  const Batch high = buf.sample_high(2000, 1.0, rng);
  for (int i = 0; i < high.size(); ++i) {
    const auto& o = high.origins[i];
    if (o.source_index == o.index + 1) CHECK(high.rewards[i] == 0.0);
  }
}

TEST_CASE("future goals are uniform over strictly later steps") {
  ReplayBuffer buf(kPush, 10);
  buf.store_episode(line_trace(10, 5));
  std::mt19937_64 rng(4);
  std::map<int, std::set<int>> sources;
  const Batch low = buf.sample_low(20000, 1.0, rng);
  for (const auto& o : low.origins) {
    CHECK(o.source_index > o.index);
    CHECK(o.source_index <= 10);
    sources[o.index].insert(o.source_index);
  }
  // Every later step is reachable, e.g. step 7 can use 8, 9 or 10.
  CHECK(sources[7] == std::set<int>{8, 9, 10});
  CHECK(sources[9] == std::set<int>{10});
}

TEST_CASE("high-level relabeling draws from later sub-episode boundaries") {
  // Boundaries ag_0..ag_5; item n = 2 can be relabeled with ag_3, ag_4 or ag_5.
  ReplayBuffer buf(kPush, 10);
  const EpisodeTrace tr = line_trace(10, 5);
  buf.store_episode(tr);
  std::mt19937_64 rng(5);
  std::set<int> from_two;
  const Batch high = buf.sample_high(5000, 1.0, rng);
  for (int i = 0; i < high.size(); ++i) {
    const auto& o = high.origins[i];
    if (o.index != 2) continue;
    from_two.insert(o.source_index);
    CHECK(Vec(high.goals.col(i)) == achieved_at_boundary(tr, o.source_index));
  }
  CHECK(from_two == std::set<int>{3, 4, 5});
}

TEST_CASE("the last sub-episode can only be relabeled with the final achieved goal") {
  ReplayBuffer buf(kPush, 10);
  const EpisodeTrace tr = line_trace(10, 5);
  buf.store_episode(tr);
  std::mt19937_64 rng(6);
  const Batch high = buf.sample_high(2000, 1.0, rng);
  for (int i = 0; i < high.size(); ++i) {
    if (high.origins[i].index != 4) continue;
    CHECK(high.origins[i].source_index == 5);
    CHECK(high.rewards[i] == 0.0);
  }
}

TEST_CASE("K=1 with a batch of at least T yields a positive reward") {
  ReplayBuffer buf(kPush, 10);
  buf.store_episode(line_trace(50, 2));
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const Batch b = buf.sample_low(50, 1.0, rng);
    CHECK(b.rewards.maxCoeff() == 0.0);
  }
}

TEST_CASE("relabel counter counts relabeled items") {
  ReplayBuffer buf(kPush, 10);
  buf.store_episode(line_trace(10, 5));
  std::mt19937_64 rng(8);
  const Batch b = buf.sample_low(300, 0.5, rng);
  int relabeled = 0;
  for (const auto& o : b.origins) relabeled += o.relabeled;
  CHECK(buf.relabel_count() == static_cast<std::uint64_t>(relabeled));
  CHECK(relabeled > 100);
  CHECK(relabeled < 200);
}

TEST_CASE("traces from the controller pass validation and the oracles") {
  DtdConfig cfg = default_config("planar-push");
  const auto traces = oracle::random_traces(cfg, 5, 11);
  ReplayBuffer buf(kPush, 10);
  for (const auto& t : traces) buf.store_episode(t);
  std::mt19937_64 rng(9);
  const Batch b = buf.sample_low(1000, 0.8, rng);
  for (int i = 0; i < b.size(); ++i) {
    CHECK(b.rewards[i] == oracle::reward(kPush, b.next_achieved.col(i), b.goals.col(i)));
  }
}

}  // TEST_SUITE
