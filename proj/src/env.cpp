#include "dtd/env.hpp"

#include "dtd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dtd {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Table goals stay off the very edge so a block can be pushed onto any of them.
constexpr double kTableGoalLow = 0.1;
constexpr double kTableGoalHigh = 0.9;
constexpr double kMinStartGoalSeparation = 0.1;
// The gripper starts within this box around the block, and the goal within
// the larger one.
constexpr double kGripperStartRange = 0.2;
constexpr double kGoalRange = 0.25;

void check_goal_dims(const EnvSpec& spec, const Vec& a, const Vec& b) {
  if (a.size() != spec.goal_dim || b.size() != spec.goal_dim) {
    throw DimensionMismatch(spec.name + ": goal dimension mismatch (expected " +
                            std::to_string(spec.goal_dim) + ")");
  }
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

double wrap_angle(double theta) {
  double w = std::remainder(theta, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

double goal_distance(const EnvSpec& spec, const Vec& a, const Vec& b) {
  check_goal_dims(spec, a, b);
  if (spec.goal_kind == GoalKind::angular) {
    const double d = std::fmod(std::abs(a[0] - b[0]), kTwoPi);
    return std::min(d, kTwoPi - d);
  }
  return (a - b).norm();
}

bool goal_reached(const EnvSpec& spec, const Vec& achieved, const Vec& goal) {
  return goal_distance(spec, achieved, goal) < spec.success_tolerance;
}

double compute_reward(const EnvSpec& spec, const Vec& achieved, const Vec& goal) {
  return goal_reached(spec, achieved, goal) ? 0.0 : -1.0;
}

Vec contain_goal(const EnvSpec& spec, const Vec& goal) {
  if (goal.size() != spec.goal_dim) throw DimensionMismatch(spec.name + ": goal dimension mismatch");
  if (spec.goal_kind == GoalKind::angular) {
    Vec out(1);
    out[0] = wrap_angle(goal[0]);
    return out;
  }
  return goal.cwiseMax(spec.goal_low).cwiseMin(spec.goal_high);
}

bool goal_in_bounds(const EnvSpec& spec, const Vec& goal) {
  if (goal.size() != spec.goal_dim) return false;
  if (spec.goal_kind == GoalKind::angular) return goal[0] > -kPi && goal[0] <= kPi;
  return (goal.array() >= spec.goal_low.array()).all() &&
         (goal.array() <= spec.goal_high.array()).all();
}

// ---------------------------------------------------------------------------

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)), goal_(Vec::Zero(spec_.goal_dim)) {}

ResetResult Environment::current() const { return {observation(), achieved_goal(), goal_}; }

ResetResult Environment::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  goal_ = sample_initial_state(rng);
  return current();
}

ResetResult Environment::reset_scenario(std::string_view name) {
  goal_ = place_scenario(name);
  return current();
}

Vec Environment::place_scenario(std::string_view name) {
  throw ScenarioError("scenario '" + std::string(name) + "' is not available for " + spec_.name);
}

EnvStepResult Environment::step(const Vec& action) {
  if (action.size() != spec_.action_dim) {
    throw DimensionMismatch(spec_.name + ": action has " + std::to_string(action.size()) +
                            " components, expected " + std::to_string(spec_.action_dim));
  }
  if (!action.allFinite()) throw NumericError(spec_.name + ": non-finite action");
  apply_action(action.cwiseMax(spec_.action_low).cwiseMin(spec_.action_high));
  EnvStepResult r;
  r.observation = observation();
  r.achieved_goal = achieved_goal();
  r.is_success = goal_reached(spec_, r.achieved_goal, goal_);
  r.reward = r.is_success ? 0.0 : -1.0;
  return r;
}

// ---------------------------------------------------------------------------

namespace push_geometry {

double point_square_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& center,
                             double half_side) {
  const double dx = std::max(std::abs(p.x() - center.x()) - half_side, 0.0);
  const double dy = std::max(std::abs(p.y() - center.y()) - half_side, 0.0);
  return std::hypot(dx, dy);
}

namespace {
bool penetrates(const Eigen::Vector2d& gripper, const Eigen::Vector2d& block) {
  return point_square_distance(gripper, block, PlanarPush::kBlockHalfSide) <
         PlanarPush::kGripperRadius;
}
constexpr int kBisectionSteps = 80;
}  // namespace

void resolve_contact(const Eigen::Vector2d& from, Eigen::Vector2d& to, Eigen::Vector2d& block) {
  const Eigen::Vector2d disp = to - from;
  const double len = disp.norm();
  if (len == 0.0 || !penetrates(to, block)) return;

  // Distance to the block along a line is convex in the offset, so the
  // penetrating offsets form an interval starting at 0; find its upper end.
  const Eigen::Vector2d dir = disp / len;
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < kBisectionSteps; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (penetrates(to, block + mid * dir)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const Eigen::Vector2d old_block = block;
  block = (block + hi * dir).cwiseMax(0.0).cwiseMin(1.0);
  if (!penetrates(to, block)) return;

  // Block pinned against the table edge: the gripper stops where it touches.
  if (penetrates(from, block)) {
    block = old_block;
    to = from;
    return;
  }
  lo = 0.0;
  hi = 1.0;
  for (int i = 0; i < kBisectionSteps; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (penetrates(from + mid * disp, block)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  to = from + lo * disp;
}

}  // namespace push_geometry

// ---------------------------------------------------------------------------

EnvSpec env_spec(std::string_view name) {
  EnvSpec s;
  s.name = std::string(name);
  s.horizon = 50;
  if (name == "planar-push") {
    s.observation_dim = 6;
    s.action_dim = 2;
    s.goal_dim = 2;
    s.goal_low = Vec::Constant(2, kTableGoalLow);
    s.goal_high = Vec::Constant(2, kTableGoalHigh);
    s.success_tolerance = 0.05;
  } else if (name == "pick-place") {
    s.observation_dim = 10;
    s.action_dim = 4;
    s.goal_dim = 3;
    s.goal_low = Vec(3);
    s.goal_low << kTableGoalLow, kTableGoalLow, 0.0;
    s.goal_high = Vec(3);
    s.goal_high << kTableGoalHigh, kTableGoalHigh, PickPlace::kMaxGoalHeight;
    s.success_tolerance = 0.05;
  } else if (name == "block-rotate") {
    s.observation_dim = 2;
    s.action_dim = 1;
    s.goal_dim = 1;
    s.goal_low = Vec::Constant(1, -kPi);
    s.goal_high = Vec::Constant(1, kPi);
    s.success_tolerance = 0.10;
    s.goal_kind = GoalKind::angular;
  } else {
    throw Error("unknown environment '" + std::string(name) +
                "' (expected planar-push, pick-place or block-rotate)");
  }
  s.action_low = Vec::Constant(s.action_dim, -1.0);
  s.action_high = Vec::Constant(s.action_dim, 1.0);
  return s;
}

std::vector<std::string> env_names() { return {"planar-push", "pick-place", "block-rotate"}; }

std::unique_ptr<Environment> make_env(std::string_view name) {
  if (name == "planar-push") return std::make_unique<PlanarPush>();
  if (name == "pick-place") return std::make_unique<PickPlace>();
  if (name == "block-rotate") return std::make_unique<BlockRotate>();
  env_spec(name);  // throws the descriptive error
  return nullptr;
}

// ---------------------------------------------------------------------------

PlanarPush::PlanarPush() : Environment(env_spec("planar-push")) {}

Vec PlanarPush::observation() const {
  Vec o(6);
  o << gripper_, block_, block_ - gripper_;
  return o;
}

Vec PlanarPush::achieved_goal() const { return block_; }

void PlanarPush::set_state(const Eigen::Vector2d& gripper, const Eigen::Vector2d& block,
                           const Vec& goal) {
  gripper_ = gripper;
  block_ = block;
  set_goal(goal);
}

Vec PlanarPush::sample_initial_state(std::mt19937_64& rng) {
  block_ = {uniform(rng, kTableGoalLow, kTableGoalHigh), uniform(rng, kTableGoalLow, kTableGoalHigh)};
  do {
    gripper_ = block_ + Eigen::Vector2d(uniform(rng, -kGripperStartRange, kGripperStartRange),
                                        uniform(rng, -kGripperStartRange, kGripperStartRange));
    gripper_ = gripper_.cwiseMax(0.0).cwiseMin(1.0);
  } while (push_geometry::point_square_distance(gripper_, block_, kBlockHalfSide) <
           kGripperRadius + 0.02);
  Vec goal(2);
  do {
    goal << uniform(rng, -kGoalRange, kGoalRange), uniform(rng, -kGoalRange, kGoalRange);
    goal += block_;
  } while ((goal - block_).norm() < kMinStartGoalSeparation || !goal_in_bounds(spec(), goal));
  return goal;
}

void PlanarPush::apply_action(const Vec& a) {
  Eigen::Vector2d to = (gripper_ + kStepSize * a.head<2>()).cwiseMax(0.0).cwiseMin(1.0);
  push_geometry::resolve_contact(gripper_, to, block_);
  gripper_ = to;
}

Vec PlanarPush::place_scenario(std::string_view name) {
  Vec goal(2);
  if (name == "diag") {
    // Block and goal at opposite corners of the goal region.
    gripper_ = {0.1, 0.1};
    block_ = {0.2, 0.2};
    goal << 0.8, 0.8;
  } else if (name == "near") {
    gripper_ = {0.3, 0.5};
    block_ = {0.4, 0.5};
    goal << 0.6, 0.5;
  } else {
    return Environment::place_scenario(name);
  }
  return goal;
}

// ---------------------------------------------------------------------------

PickPlace::PickPlace() : Environment(env_spec("pick-place")) {}

Vec PickPlace::observation() const {
  Vec o(10);
  o << gripper_, aperture_, block_, block_ - gripper_;
  return o;
}

Vec PickPlace::achieved_goal() const { return block_; }

void PickPlace::set_state(const Eigen::Vector3d& gripper, const Eigen::Vector3d& block,
                          bool attached, const Vec& goal) {
  gripper_ = gripper;
  block_ = block;
  attached_ = attached;
  aperture_ = attached ? 0.0 : 1.0;
  set_goal(goal);
}

Vec PickPlace::sample_initial_state(std::mt19937_64& rng) {
  attached_ = false;
  aperture_ = 1.0;
  block_ = {uniform(rng, kTableGoalLow, kTableGoalHigh), uniform(rng, kTableGoalLow, kTableGoalHigh),
            0.0};
  do {
    gripper_ = {block_.x() + uniform(rng, -kGripperStartRange, kGripperStartRange),
                block_.y() + uniform(rng, -kGripperStartRange, kGripperStartRange),
                uniform(rng, 0.0, 0.2)};
    gripper_.head<2>() = gripper_.head<2>().cwiseMax(0.0).cwiseMin(1.0);
  } while (push_geometry::point_square_distance(gripper_.head<2>(), block_.head<2>(),
                                                PlanarPush::kBlockHalfSide) <
           PlanarPush::kGripperRadius + 0.02);
  Vec goal(3);
  do {
    const bool in_air = std::bernoulli_distribution(0.5)(rng);
    goal << block_.x() + uniform(rng, -kGoalRange, kGoalRange),
        block_.y() + uniform(rng, -kGoalRange, kGoalRange),
        in_air ? uniform(rng, 0.0, kMaxGoalHeight) : 0.0;
  } while ((goal - block_).norm() < kMinStartGoalSeparation || !goal_in_bounds(spec(), goal));
  return goal;
}

void PickPlace::apply_action(const Vec& a) {
  const double grip = a[3];
  aperture_ = 0.5 * (1.0 + grip);
  Eigen::Vector3d to = gripper_ + kStepSize * a.head<3>();
  to.head<2>() = to.head<2>().cwiseMax(0.0).cwiseMin(1.0);
  to.z() = std::clamp(to.z(), 0.0, kMaxHeight);

  if (attached_) {
    gripper_ = to;
    if (grip >= 0.0) {
      attached_ = false;
      block_ = {to.x(), to.y(), 0.0};
    } else {
      block_ = to;
    }
    return;
  }

  if (grip < 0.0 && (to - block_).norm() < kGraspRange) {
    attached_ = true;
    gripper_ = to;
    block_ = to;
    return;
  }

  const double top = block_.z() + PlanarPush::kBlockHalfSide;
  if (to.z() < top) {
    Eigen::Vector2d to_xy = to.head<2>();
    const bool over_block = push_geometry::point_square_distance(
                                to_xy, block_.head<2>(), PlanarPush::kBlockHalfSide) <
                            PlanarPush::kGripperRadius;
    if (gripper_.z() >= top && over_block) {
      to.z() = top;  // rests on the top face
    } else {
      Eigen::Vector2d block_xy = block_.head<2>();
      push_geometry::resolve_contact(gripper_.head<2>(), to_xy, block_xy);
      to.head<2>() = to_xy;
      block_.head<2>() = block_xy;
    }
  }
  gripper_ = to;
}

Vec PickPlace::place_scenario(std::string_view name) {
  attached_ = false;
  aperture_ = 1.0;
  Vec goal(3);
  if (name == "diag") {
    gripper_ = {0.1, 0.1, 0.0};
    block_ = {0.2, 0.2, 0.0};
    goal << 0.8, 0.8, 0.0;
  } else if (name == "near") {
    gripper_ = {0.3, 0.5, 0.0};
    block_ = {0.4, 0.5, 0.0};
    goal << 0.6, 0.5, 0.0;
  } else {
    return Environment::place_scenario(name);
  }
  return goal;
}

// ---------------------------------------------------------------------------

BlockRotate::BlockRotate() : Environment(env_spec("block-rotate")) {}

Vec BlockRotate::observation() const {
  Vec o(2);
  o << std::cos(theta_), std::sin(theta_);
  return o;
}

Vec BlockRotate::achieved_goal() const { return Vec::Constant(1, theta_); }

void BlockRotate::set_state(double theta, const Vec& goal) {
  theta_ = wrap_angle(theta);
  set_goal(goal);
}

Vec BlockRotate::sample_initial_state(std::mt19937_64& rng) {
  theta_ = wrap_angle(uniform(rng, -kPi, kPi));
  Vec goal(1);
  do {
    goal[0] = wrap_angle(uniform(rng, -kPi, kPi));
  } while (goal_distance(spec(), goal, achieved_goal()) < 2.0 * spec().success_tolerance);
  return goal;
}

void BlockRotate::apply_action(const Vec& a) { theta_ = wrap_angle(theta_ + kStepSize * a[0]); }

}  // namespace dtd
