#pragma once

#include "dtd/env.hpp"
#include "dtd/nn.hpp"
#include "dtd/replay.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace dtd {

struct DdpgConfig {
  std::vector<int> hidden_layers{64, 64, 64};
  nn::Activation hidden_activation = nn::Activation::relu;
  double gamma = 0.98;
  double tau = 0.95;
  double actor_lr = 3e-3;
  double critic_lr = 3e-3;
  double explore_eps = 0.2;
  double explore_noise_std = 0.1;
  double action_l2 = 1.0;

  friend bool operator==(const DdpgConfig&, const DdpgConfig&) = default;
};

/// Running mean/variance of network inputs (Chan's parallel update).
class Normalizer {
 public:
  static constexpr double kClip = 5.0;
  static constexpr double kVarianceFloor = 1e-8;

  Normalizer() = default;
  explicit Normalizer(int dim);

  /// Each column of `samples` is one input vector.
  void update(const Mat& samples);
  Mat normalize(const Mat& inputs) const;
  Vec normalize(const Vec& input) const;

  int dim() const { return static_cast<int>(mean_.size()); }
  double count() const { return count_; }
  const Vec& mean() const { return mean_; }
  Vec variance() const;
  const Vec& sum_sq_dev() const { return m2_; }
  void restore(double count, Vec mean, Vec m2);

 private:
  double count_ = 0.0;
  Vec mean_;
  Vec m2_;
};

struct TrainStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double mean_q = 0.0;
};

/// Goal-conditioned deterministic actor-critic. The actor maps
/// normalize(obs || goal) to a tanh-domain action u in (-1, 1)^d, which is
/// scaled to [action_low, action_high]; the critic sees normalize(obs || goal)
/// followed by the tanh-domain action.
/// Reusable buffers for one training step. Copies start empty so agent
/// snapshots stay cheap.
struct TrainWorkspace {
  nn::ForwardCache actor_cache, critic_cache, target_actor_cache, target_critic_cache;
  nn::BackwardResult critic_back, actor_back;
  Mat critic_in;

  TrainWorkspace() = default;
  TrainWorkspace(const TrainWorkspace&) {}
  TrainWorkspace& operator=(const TrainWorkspace&) { return *this; }
};

struct ActorLossResult;

struct DdpgAgent {
  nn::MlpParams actor;
  nn::MlpParams critic;
  nn::MlpParams actor_target;
  nn::MlpParams critic_target;
  nn::AdamState actor_opt;
  nn::AdamState critic_opt;
  Vec action_low;
  Vec action_high;
  int obs_dim = 0;
  int goal_dim = 0;
  DdpgConfig config;
  Normalizer normalizer;
  TrainWorkspace workspace;

  DdpgAgent() = default;
  DdpgAgent(int obs_dim, int goal_dim, Vec action_low, Vec action_high, DdpgConfig config,
            std::uint64_t seed);

  int input_dim() const { return obs_dim + goal_dim; }
  int action_dim() const { return static_cast<int>(action_low.size()); }

  Vec act(const Vec& obs, const Vec& goal, bool explore, std::mt19937_64& rng) const;
  /// Pre-scale actor output in (-1, 1)^d.
  Vec actor_output(const Vec& obs, const Vec& goal) const;

  TrainStats train_batch(const Batch& batch);
  void update_targets();
  void normalizer_update(const Mat& inputs);

  /// Critic values for raw (un-normalized) inputs and actions in env units.
  Vec q_values(const Mat& inputs, const Mat& actions) const;

  Mat to_unit(const Mat& actions) const;
  Mat from_unit(const Mat& unit) const;

  /// Bootstrapped critic targets, clipped to [-1/(1-gamma), 0].
  Vec critic_targets(const Batch& batch) const;

 private:
  Vec critic_targets(const Mat& next_x, const Batch& batch, TrainWorkspace& ws) const;
  friend ActorLossResult actor_loss(const DdpgAgent&, const Batch&);
  friend void actor_loss_into(const DdpgAgent&, const Mat&, TrainWorkspace&, ActorLossResult&);
};

/// Actor loss -mean Q(x, mu(x)) + c * mean ||mu(x)||^2 and its gradient with
/// respect to the actor parameters, evaluated with the current critic.
struct ActorLossResult {
  double loss = 0.0;
  double mean_q = 0.0;
  nn::ParamGrads grads;
};
ActorLossResult actor_loss(const DdpgAgent& agent, const Batch& batch);

}  // namespace dtd
