#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace dtd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class GoalKind { positional, angular };

struct EnvSpec {
  std::string name;
  int observation_dim = 0;
  int action_dim = 0;
  int goal_dim = 0;
  Vec action_low;
  Vec action_high;
  Vec goal_low;
  Vec goal_high;
  double success_tolerance = 0.05;
  int horizon = 50;
  GoalKind goal_kind = GoalKind::positional;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double theta);

/// Euclidean distance for positional goals, shorter arc for angular ones.
double goal_distance(const EnvSpec& spec, const Vec& a, const Vec& b);

/// Sparse reward: 0 when strictly within tolerance of the goal, -1 otherwise.
double compute_reward(const EnvSpec& spec, const Vec& achieved, const Vec& goal);
bool goal_reached(const EnvSpec& spec, const Vec& achieved, const Vec& goal);

/// Projects a goal into the declared goal bounds (clipping, or wrapping for angles).
Vec contain_goal(const EnvSpec& spec, const Vec& goal);
bool goal_in_bounds(const EnvSpec& spec, const Vec& goal);

struct ResetResult {
  Vec observation;
  Vec achieved_goal;
  Vec goal;
};

struct EnvStepResult {
  Vec observation;
  Vec achieved_goal;
  double reward = -1.0;
  bool is_success = false;
};

/// Goal-conditioned environment with sparse rewards. Subclasses provide the
/// dynamics; the base class owns the episode goal and the reward rule.
class Environment {
 public:
  explicit Environment(EnvSpec spec);
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }
  const Vec& goal() const { return goal_; }

  ResetResult reset(std::uint64_t seed);
  EnvStepResult step(const Vec& action);

  /// Fixed start/goal placement used for value-landscape inspection.
  ResetResult reset_scenario(std::string_view name);
  virtual std::vector<std::string> scenarios() const { return {}; }

  virtual Vec observation() const = 0;
  virtual Vec achieved_goal() const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  /// Place the initial state and return the episode goal.
  virtual Vec sample_initial_state(std::mt19937_64& rng) = 0;
  virtual void apply_action(const Vec& clipped_action) = 0;
  /// Place a named scenario and return its goal. Throws ScenarioError if unknown.
  virtual Vec place_scenario(std::string_view name);

  void set_goal(Vec goal) { goal_ = std::move(goal); }
  ResetResult current() const;

 private:
  EnvSpec spec_;
  Vec goal_;
};

/// Planar pushing on the unit table. The gripper is a disc, the block an
/// axis-aligned square that only moves when the gripper pushes into it.
class PlanarPush final : public Environment {
 public:
  static constexpr double kStepSize = 0.05;
  static constexpr double kGripperRadius = 0.03;
  static constexpr double kBlockHalfSide = 0.04;

  PlanarPush();

  Vec observation() const override;
  Vec achieved_goal() const override;
  std::vector<std::string> scenarios() const override { return {"diag", "near"}; }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<PlanarPush>(*this);
  }

  const Eigen::Vector2d& gripper() const { return gripper_; }
  const Eigen::Vector2d& block() const { return block_; }
  void set_state(const Eigen::Vector2d& gripper, const Eigen::Vector2d& block, const Vec& goal);

 protected:
  Vec sample_initial_state(std::mt19937_64& rng) override;
  void apply_action(const Vec& clipped_action) override;
  Vec place_scenario(std::string_view name) override;

 private:
  Eigen::Vector2d gripper_{0.5, 0.5};
  Eigen::Vector2d block_{0.5, 0.5};
};

/// Pick-and-place: the planar push rule on the table plus a vertical axis and
/// a grip channel. A gripped block follows the gripper; a released one drops.
class PickPlace final : public Environment {
 public:
  static constexpr double kStepSize = 0.05;
  static constexpr double kGraspRange = 0.05;
  static constexpr double kMaxHeight = 0.5;
  static constexpr double kMaxGoalHeight = 0.3;

  PickPlace();

  Vec observation() const override;
  Vec achieved_goal() const override;
  std::vector<std::string> scenarios() const override { return {"diag", "near"}; }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<PickPlace>(*this);
  }

  const Eigen::Vector3d& gripper() const { return gripper_; }
  const Eigen::Vector3d& block() const { return block_; }
  bool attached() const { return attached_; }
  void set_state(const Eigen::Vector3d& gripper, const Eigen::Vector3d& block, bool attached,
                 const Vec& goal);

 protected:
  Vec sample_initial_state(std::mt19937_64& rng) override;
  void apply_action(const Vec& clipped_action) override;
  Vec place_scenario(std::string_view name) override;

 private:
  Eigen::Vector3d gripper_{0.5, 0.5, 0.1};
  Eigen::Vector3d block_{0.5, 0.5, 0.0};
  double aperture_ = 1.0;
  bool attached_ = false;
};

/// In-hand rotation reduced to a single yaw angle.
class BlockRotate final : public Environment {
 public:
  static constexpr double kStepSize = 0.1;

  BlockRotate();

  Vec observation() const override;
  Vec achieved_goal() const override;
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<BlockRotate>(*this);
  }

  double angle() const { return theta_; }
  void set_state(double theta, const Vec& goal);

 protected:
  Vec sample_initial_state(std::mt19937_64& rng) override;
  void apply_action(const Vec& clipped_action) override;

 private:
  double theta_ = 0.0;
};

/// `planar-push`, `pick-place` or `block-rotate`.
std::unique_ptr<Environment> make_env(std::string_view name);
std::vector<std::string> env_names();
EnvSpec env_spec(std::string_view name);

namespace push_geometry {
/// Distance from a point to an axis-aligned square (0 inside).
double point_square_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& center,
                             double half_side);
/// Applies the planar push rule for a gripper moving from `from` to `to`.
/// Updates `block` and may shorten `to` when the block is pinned at the edge.
void resolve_contact(const Eigen::Vector2d& from, Eigen::Vector2d& to, Eigen::Vector2d& block);
}  // namespace push_geometry

}  // namespace dtd
