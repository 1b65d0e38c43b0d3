#include "oracles.hpp"

#include "dtd/env.hpp"
#include "dtd/errors.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace dtd;

namespace {

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

// The stated step rule for a gripper that touches nothing.
Eigen::Vector2d free_step(const Eigen::Vector2d& p, const Vec& a) {
  Eigen::Vector2d out;
  for (int i = 0; i < 2; ++i) {
    const double ai = std::clamp(a[i], -1.0, 1.0);
    out[i] = std::clamp(p[i] + 0.05 * ai, 0.0, 1.0);
  }
  return out;
}

Vec random_action(int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  Vec a(dim);
  for (int i = 0; i < dim; ++i) a[i] = u(rng);
  return a;
}

}  // namespace

TEST_SUITE("env") {

TEST_CASE("specs have the documented dimensions") {
  const EnvSpec push = env_spec("planar-push");
  CHECK(push.observation_dim == 6);
  CHECK(push.action_dim == 2);
  CHECK(push.goal_dim == 2);
  const EnvSpec pick = env_spec("pick-place");
  CHECK(pick.observation_dim == 10);
  CHECK(pick.action_dim == 4);
  CHECK(pick.goal_dim == 3);
  const EnvSpec rot = env_spec("block-rotate");
  CHECK(rot.observation_dim == 2);
  CHECK(rot.action_dim == 1);
  CHECK(rot.goal_dim == 1);
  CHECK(rot.success_tolerance == 0.10);
  CHECK_THROWS_AS(env_spec("cartpole"), Error);
}

TEST_CASE("reset is deterministic per seed") {
  for (const auto& name : env_names()) {
    auto a = make_env(name);
    auto b = make_env(name);
    const ResetResult ra = a->reset(42);
    const ResetResult rb = b->reset(42);
    CHECK(ra.observation == rb.observation);
    CHECK(ra.achieved_goal == rb.achieved_goal);
    CHECK(ra.goal == rb.goal);
  }
}

TEST_CASE("push achieved goal is the block slice of the observation") {
  auto env = make_env("planar-push");
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ResetResult r = env->reset(s);
    CHECK(r.achieved_goal == r.observation.segment(2, 2));
  }
}

TEST_CASE("sampled goals lie within goal bounds") {
  for (const auto& name : env_names()) {
    auto env = make_env(name);
    for (std::uint64_t s = 0; s < 1000; ++s) {
      const ResetResult r = env->reset(s);
      CHECK(goal_in_bounds(env->spec(), r.goal));
      CHECK(r.observation.allFinite());
    }
  }
}

TEST_CASE("push reset: gripper and block do not overlap") {
  PlanarPush env;
  for (std::uint64_t s = 0; s < 500; ++s) {
    env.reset(s);
    CHECK(push_geometry::point_square_distance(env.gripper(), env.block(),
                                               PlanarPush::kBlockHalfSide) >=
          PlanarPush::kGripperRadius);
  }
}

TEST_CASE("zero action leaves the state unchanged") {
  for (const auto& name : env_names()) {
    auto env = make_env(name);
    const ResetResult r = env->reset(3);
    const EnvStepResult s = env->step(Vec::Zero(env->spec().action_dim));
    CHECK(s.achieved_goal == r.achieved_goal);
    if (name != "pick-place") CHECK(s.observation == r.observation);
  }
  // Pick-place's aperture channel follows the grip command, so compare positions.
  PickPlace pick;
  pick.set_state({0.3, 0.3, 0.1}, {0.7, 0.7, 0.0}, false, v({0.5, 0.5, 0.0}));
  pick.step(Vec::Zero(4));
  CHECK(pick.gripper() == Eigen::Vector3d(0.3, 0.3, 0.1));
  CHECK(pick.block() == Eigen::Vector3d(0.7, 0.7, 0.0));
}

TEST_CASE("push step rule away from the block") {
  PlanarPush env;
  env.set_state({0.5, 0.5}, {0.2, 0.2}, v({0.8, 0.8}));
  env.step(v({1.0, 0.0}));
  const Eigen::Vector2d expected = free_step({0.5, 0.5}, v({1.0, 0.0}));
  CHECK(env.gripper() == expected);
  CHECK(env.gripper().x() == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(env.gripper().y() == 0.5);
  CHECK(env.block() == Eigen::Vector2d(0.2, 0.2));
}

TEST_CASE("push actions are clipped to [-1, 1] and the gripper to the table") {
  PlanarPush env;
  env.set_state({0.99, 0.5}, {0.2, 0.2}, v({0.8, 0.8}));
  env.step(v({5.0, -3.0}));
  CHECK(env.gripper().x() == 1.0);
  CHECK(env.gripper().y() == doctest::Approx(0.45).epsilon(1e-15));
}

TEST_CASE("contact push translates the block by the penetration depth") {
  // Gripper edge at 0.43, block face at 0.46; moving 0.05 right would overlap
  // by 0.02, so the block ends up 0.02 further right.
  PlanarPush env;
  env.set_state({0.40, 0.5}, {0.5, 0.5}, v({0.8, 0.8}));
  env.step(v({1.0, 0.0}));
  CHECK(env.gripper().x() == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(env.block().x() == doctest::Approx(0.52).epsilon(1e-12));
  CHECK(env.block().y() == 0.5);
  CHECK(push_geometry::point_square_distance(env.gripper(), env.block(), PlanarPush::kBlockHalfSide) ==
        doctest::Approx(PlanarPush::kGripperRadius).epsilon(1e-12));
}

TEST_CASE("diagonal push moves the block along the displacement") {
  PlanarPush env;
  env.set_state({0.42, 0.42}, {0.5, 0.5}, v({0.8, 0.8}));
  env.step(v({1.0, 1.0}));
  const Eigen::Vector2d moved = env.block() - Eigen::Vector2d(0.5, 0.5);
  CHECK(moved.x() > 0.0);
  CHECK(moved.x() == doctest::Approx(moved.y()).epsilon(1e-12));
}

TEST_CASE("block pinned at the table edge stops the gripper") {
  PlanarPush env;
  env.set_state({0.90, 0.5}, {1.0, 0.5}, v({0.5, 0.5}));
  env.step(v({1.0, 0.0}));
  CHECK(env.block().x() == 1.0);
  CHECK(push_geometry::point_square_distance(env.gripper(), env.block(), PlanarPush::kBlockHalfSide) >=
        PlanarPush::kGripperRadius - 1e-12);
}

TEST_CASE("rotate steps by 0.1 per unit action and wraps past pi") {
  BlockRotate env;
  // 3.0 + 0.1 = 3.1 is still below pi, so no wrap happens yet.
  env.set_state(3.0, v({0.0}));
  env.step(v({1.0}));
  CHECK(env.angle() == doctest::Approx(3.1).epsilon(1e-15));
  CHECK(env.observation()[0] == doctest::Approx(std::cos(3.1)));
  env.step(v({1.0}));
  CHECK(env.angle() == doctest::Approx(3.2 - 2.0 * std::numbers::pi).epsilon(1e-14));
  CHECK(env.angle() == doctest::Approx(-3.0832).epsilon(1e-4));
  env.step(v({-1.0}));
  CHECK(env.angle() == doctest::Approx(3.1).epsilon(1e-14));
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(std::numbers::pi) == std::numbers::pi);
  CHECK(wrap_angle(-std::numbers::pi) == std::numbers::pi);
  CHECK(wrap_angle(0.5) == 0.5);
  CHECK(wrap_angle(7.0) == doctest::Approx(7.0 - 2.0 * std::numbers::pi));
}

TEST_CASE("goal distance examples") {
  const EnvSpec push = env_spec("planar-push");
  const EnvSpec rot = env_spec("block-rotate");
  CHECK(goal_distance(push, v({0.3, 0.7}), v({0.3, 0.7})) == 0.0);
  CHECK(goal_distance(push, v({0.0, 0.0}), v({3.0, 4.0})) == 5.0);
  CHECK(goal_distance(rot, v({3.0}), v({-3.0})) == doctest::Approx(2.0 * std::numbers::pi - 6.0).epsilon(1e-12));
  CHECK(goal_distance(rot, v({3.0}), v({-3.0})) == doctest::Approx(0.28319).epsilon(1e-4));
  CHECK_THROWS_AS(goal_distance(push, v({0.0}), v({0.0, 1.0})), DimensionMismatch);
}

TEST_CASE("angular distance is symmetric, non-negative and at most pi") {
  const EnvSpec rot = env_spec("block-rotate");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec a = v({u(rng)});
    const Vec b = v({u(rng)});
    const double d = goal_distance(rot, a, b);
    CHECK(d >= 0.0);
    CHECK(d <= std::numbers::pi + 1e-12);
    CHECK(d == doctest::Approx(goal_distance(rot, b, a)).epsilon(1e-12));
  }
}

TEST_CASE("reward threshold is strict") {
  const EnvSpec push = env_spec("planar-push");
  CHECK(compute_reward(push, v({0.5, 0.5}), v({0.5, 0.5})) == 0.0);
  CHECK(compute_reward(push, v({0.0, 0.0}), v({0.049, 0.0})) == 0.0);
  CHECK(compute_reward(push, v({0.0, 0.0}), v({0.05, 0.0})) == -1.0);
  const EnvSpec rot = env_spec("block-rotate");
  CHECK(compute_reward(rot, v({3.1}), v({-3.1})) == 0.0);
}

TEST_CASE("step rejects a wrong action dimension") {
  auto env = make_env("planar-push");
  env->reset(0);
  CHECK_THROWS_AS(env->step(Vec::Zero(3)), DimensionMismatch);
}

TEST_CASE("random rollouts: containment, inertia and reward consistency") {
  std::mt19937_64 rng(9);
  for (const auto& name : env_names()) {
    auto env = make_env(name);
    const EnvSpec& spec = env->spec();
    for (int ep = 0; ep < 20; ++ep) {
      env->reset(rng());
      Vec prev_obs = env->observation();
      for (int t = 0; t < spec.horizon; ++t) {
        const EnvStepResult s = env->step(random_action(spec.action_dim, rng));
        CHECK(s.reward == oracle::reward(spec, s.achieved_goal, env->goal()));
        CHECK(s.is_success == (s.reward == 0.0));
        CHECK(s.observation.allFinite());
        if (spec.goal_kind == GoalKind::positional) {
          CHECK(s.observation.head(spec.goal_dim).minCoeff() >= 0.0);
          CHECK(s.achieved_goal.head(2).minCoeff() >= 0.0);
          CHECK(s.achieved_goal.head(2).maxCoeff() <= 1.0);
        } else {
          CHECK(std::abs(s.observation.squaredNorm() - 1.0) < 1e-12);
        }
        prev_obs = s.observation;
      }
    }
  }

  PlanarPush push;
  for (int ep = 0; ep < 50; ++ep) {
    push.reset(rng());
    for (int t = 0; t < 50; ++t) {
      const Eigen::Vector2d block_before = push.block();
      push.step(random_action(2, rng));
      if (push.block() != block_before) {
        // The block only moves when the gripper ends up touching it.
        CHECK(push_geometry::point_square_distance(push.gripper(), push.block(),
                                                   PlanarPush::kBlockHalfSide) ==
              doctest::Approx(PlanarPush::kGripperRadius).epsilon(1e-9));
      }
      CHECK(push_geometry::point_square_distance(push.gripper(), push.block(),
                                                 PlanarPush::kBlockHalfSide) >=
            PlanarPush::kGripperRadius - 1e-12);
    }
  }
}

TEST_CASE("push without contact is reversible") {
  PlanarPush env;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    env.set_state({0.5, 0.5}, {0.1, 0.9}, v({0.8, 0.8}));
    const Vec a = v({u(rng), u(rng)});
    env.step(a);
    env.step(-a);
    CHECK((env.gripper() - Eigen::Vector2d(0.5, 0.5)).norm() < 1e-12);
  }
}

TEST_CASE("pick-place grasp, lift and release") {
  PickPlace env;
  env.set_state({0.5, 0.5, 0.02}, {0.5, 0.5, 0.0}, false, v({0.5, 0.5, 0.2}));
  env.step(v({0.0, 0.0, 0.0, -1.0}));
  CHECK(env.attached());
  CHECK(env.block() == env.gripper());
  env.step(v({0.0, 0.0, 1.0, -1.0}));
  CHECK(env.block().z() == doctest::Approx(0.07));
  CHECK(env.achieved_goal() == Vec(env.block()));
  env.step(v({1.0, 0.0, 0.0, 1.0}));
  CHECK_FALSE(env.attached());
  CHECK(env.block().z() == 0.0);
  CHECK(env.block().x() == doctest::Approx(0.55));
}

TEST_CASE("pick-place does not grasp out of range or with an open gripper") {
  PickPlace env;
  env.set_state({0.5, 0.5, 0.3}, {0.5, 0.5, 0.0}, false, v({0.5, 0.5, 0.2}));
  env.step(v({0.0, 0.0, 0.0, -1.0}));
  CHECK_FALSE(env.attached());
  env.set_state({0.5, 0.5, 0.02}, {0.5, 0.5, 0.0}, false, v({0.5, 0.5, 0.2}));
  env.step(v({0.0, 0.0, 0.0, 0.5}));
  CHECK_FALSE(env.attached());
  CHECK(env.block().z() == 0.0);
}

TEST_CASE("named scenarios") {
  auto push = make_env("planar-push");
  const ResetResult d = push->reset_scenario("diag");
  CHECK(goal_distance(push->spec(), d.achieved_goal, d.goal) > 0.5);
  CHECK(push->reset_scenario("diag").observation == d.observation);
  CHECK_THROWS_AS(push->reset_scenario("nowhere"), ScenarioError);
  auto rot = make_env("block-rotate");
  CHECK_THROWS_AS(rot->reset_scenario("diag"), ScenarioError);
}

TEST_CASE("contain_goal clips positions and wraps angles") {
  const EnvSpec push = env_spec("planar-push");
  CHECK(contain_goal(push, v({-1.0, 0.5})) == v({0.1, 0.5}));
  const EnvSpec rot = env_spec("block-rotate");
  CHECK(contain_goal(rot, v({3.5}))[0] == doctest::Approx(3.5 - 2.0 * std::numbers::pi));
}

}  // TEST_SUITE
