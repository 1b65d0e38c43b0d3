#include "dtd/ddpg.hpp"

#include "dtd/errors.hpp"

#include <cmath>

namespace dtd {

namespace {

Mat vstack(const Mat& top, const Mat& bottom) {
  Mat out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes;
  sizes.push_back(in);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

// --- Normalizer -------------------------------------------------------------

Normalizer::Normalizer(int dim) : mean_(Vec::Zero(dim)), m2_(Vec::Zero(dim)) {}

void Normalizer::update(const Mat& samples) {
  if (samples.cols() == 0) return;
  if (samples.rows() != dim()) throw DimensionMismatch("normalizer: input dimension mismatch");
  const double nb = static_cast<double>(samples.cols());
  const Vec batch_mean = samples.rowwise().mean();
  const Vec batch_m2 = (samples.colwise() - batch_mean).rowwise().squaredNorm().transpose();
  const double total = count_ + nb;
  const Vec delta = batch_mean - mean_;
  mean_ += delta * (nb / total);
  m2_ += batch_m2 + delta.cwiseProduct(delta) * (count_ * nb / total);
  count_ = total;
}

Vec Normalizer::variance() const {
  if (count_ == 0.0) return Vec::Ones(dim());
  return (m2_ / count_).cwiseMax(kVarianceFloor);
}

Mat Normalizer::normalize(const Mat& inputs) const {
  if (inputs.rows() != dim()) throw DimensionMismatch("normalizer: input dimension mismatch");
  const Vec inv_std = variance().cwiseSqrt().cwiseInverse();
  Mat out = (inputs.colwise() - mean_).array().colwise() * inv_std.array();
  return out.cwiseMax(-kClip).cwiseMin(kClip);
}

Vec Normalizer::normalize(const Vec& input) const { return normalize(Mat(input)).col(0); }

void Normalizer::restore(double count, Vec mean, Vec m2) {
  count_ = count;
  mean_ = std::move(mean);
  m2_ = std::move(m2);
}

// --- Agent ------------------------------------------------------------------

DdpgAgent::DdpgAgent(int obs_dim_, int goal_dim_, Vec low, Vec high, DdpgConfig cfg,
                     std::uint64_t seed)
    : action_low(std::move(low)),
      action_high(std::move(high)),
      obs_dim(obs_dim_),
      goal_dim(goal_dim_),
      config(std::move(cfg)),
      normalizer(obs_dim_ + goal_dim_) {
  if (action_low.size() != action_high.size() || action_low.size() == 0) {
    throw DimensionMismatch("agent: action bounds must be non-empty and of equal length");
  }
  if (!(config.gamma > 0.0 && config.gamma < 1.0)) throw Error("agent: gamma must lie in (0, 1)");
  if (!(config.tau >= 0.0 && config.tau <= 1.0)) throw Error("agent: tau must lie in [0, 1]");
  const int in = obs_dim + goal_dim;
  const int ad = action_dim();
  const auto actor_sizes = layer_sizes(in, config.hidden_layers, ad);
  const auto critic_sizes = layer_sizes(in + ad, config.hidden_layers, 1);
  actor = nn::mlp_init(actor_sizes, config.hidden_activation, nn::Activation::tanh, seed);
  critic = nn::mlp_init(critic_sizes, config.hidden_activation, nn::Activation::linear,
                        seed ^ 0x9e3779b97f4a7c15ULL);
  actor_target = actor;
  critic_target = critic;
  actor_opt = nn::AdamState::for_params(actor, config.actor_lr);
  critic_opt = nn::AdamState::for_params(critic, config.critic_lr);
}

Mat DdpgAgent::to_unit(const Mat& actions) const {
  const Vec mid = 0.5 * (action_high + action_low);
  const Vec half = 0.5 * (action_high - action_low);
  return (actions.colwise() - mid).array().colwise() / half.array();
}

Mat DdpgAgent::from_unit(const Mat& unit) const {
  const Vec mid = 0.5 * (action_high + action_low);
  const Vec half = 0.5 * (action_high - action_low);
  Mat out = (unit.array().colwise() * half.array()).matrix().colwise() + mid;
  // Rounding in mid + half * u may step one ulp outside the bounds.
  return out.cwiseMax(action_low.replicate(1, out.cols()))
      .cwiseMin(action_high.replicate(1, out.cols()));
}

Vec DdpgAgent::actor_output(const Vec& obs, const Vec& goal) const {
  if (obs.size() != obs_dim || goal.size() != goal_dim) {
    throw DimensionMismatch("act: observation/goal dimension mismatch");
  }
  Vec x(obs_dim + goal_dim);
  x << obs, goal;
  return nn::forward(actor, normalizer.normalize(x));
}

Vec DdpgAgent::act(const Vec& obs, const Vec& goal, bool explore, std::mt19937_64& rng) const {
  const Vec u = actor_output(obs, goal);
  if (!explore) return from_unit(Mat(u)).col(0);

  const int d = action_dim();
  if (std::bernoulli_distribution(config.explore_eps)(rng)) {
    Vec a(d);
    for (int i = 0; i < d; ++i) {
      a[i] = std::uniform_real_distribution<double>(action_low[i], action_high[i])(rng);
    }
    return a;
  }
  Vec a = from_unit(Mat(u)).col(0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < d; ++i) {
    const double half = 0.5 * (action_high[i] - action_low[i]);
    a[i] += config.explore_noise_std * half * noise(rng);
  }
  return a.cwiseMax(action_low).cwiseMin(action_high);
}

Vec DdpgAgent::q_values(const Mat& inputs, const Mat& actions) const {
  return nn::forward_batch(critic, vstack(normalizer.normalize(inputs), to_unit(actions)))
      .row(0)
      .transpose();
}

Vec DdpgAgent::critic_targets(const Batch& batch) const {
  TrainWorkspace ws;
  return critic_targets(normalizer.normalize(batch.next_inputs), batch, ws);
}

Vec DdpgAgent::critic_targets(const Mat& next_x, const Batch& batch, TrainWorkspace& ws) const {
  nn::forward_batch(actor_target, next_x, &ws.target_actor_cache);
  ws.critic_in.resize(next_x.rows() + action_dim(), next_x.cols());
  ws.critic_in.topRows(next_x.rows()) = next_x;
  ws.critic_in.bottomRows(action_dim()) = ws.target_actor_cache.post.back();
  const Vec next_q =
      nn::forward_batch(critic_target, ws.critic_in, &ws.target_critic_cache).row(0).transpose();
  const double lo = -1.0 / (1.0 - config.gamma);
  Vec y = batch.rewards.array() + config.gamma * (1.0 - batch.done.array()) * next_q.array();
  return y.cwiseMax(lo).cwiseMin(0.0);
}

void actor_loss_into(const DdpgAgent& agent, const Mat& x, TrainWorkspace& ws,
                     ActorLossResult& r) {
  const auto B = x.cols();
  nn::forward_batch(agent.actor, x, &ws.actor_cache);
  const Mat& u = ws.actor_cache.post.back();
  ws.critic_in.resize(x.rows() + u.rows(), B);
  ws.critic_in.topRows(x.rows()) = x;
  ws.critic_in.bottomRows(u.rows()) = u;
  const Mat q = nn::forward_batch(agent.critic, ws.critic_in, &ws.critic_cache);

  r.mean_q = q.mean();
  const double c = agent.config.action_l2;
  r.loss = -r.mean_q + c * u.colwise().squaredNorm().mean();

  const Mat dq = Mat::Constant(1, B, -1.0 / static_cast<double>(B));
  nn::backward(agent.critic, ws.critic_cache, dq, ws.critic_back);
  const Mat du = ws.critic_back.input_grad.bottomRows(u.rows()) +
                 (2.0 * c / static_cast<double>(B)) * u;
  nn::backward(agent.actor, ws.actor_cache, du, ws.actor_back);
  r.grads = ws.actor_back.grads;
}

ActorLossResult actor_loss(const DdpgAgent& agent, const Batch& batch) {
  TrainWorkspace ws;
  ActorLossResult r;
  actor_loss_into(agent, agent.normalizer.normalize(batch.inputs), ws, r);
  return r;
}

TrainStats DdpgAgent::train_batch(const Batch& batch) {
  const int B = batch.size();
  if (B == 0) throw ReplayError("train_batch: empty batch");
  if (batch.inputs.rows() != input_dim() || batch.actions.rows() != action_dim()) {
    throw DimensionMismatch("train_batch: batch dimensions do not match the agent");
  }
  TrainWorkspace& ws = workspace;

  TrainStats stats;
  // Critic: regress onto clipped one-step bootstrapped targets.
  const Vec y = critic_targets(normalizer.normalize(batch.next_inputs), batch, ws);
  const Mat x = normalizer.normalize(batch.inputs);
  ws.critic_in.resize(x.rows() + action_dim(), B);
  ws.critic_in.topRows(x.rows()) = x;
  ws.critic_in.bottomRows(action_dim()) = to_unit(batch.actions);
  const Mat q = nn::forward_batch(critic, ws.critic_in, &ws.critic_cache);
  const Eigen::RowVectorXd diff = q.row(0) - y.transpose();
  stats.critic_loss = diff.squaredNorm() / B;
  if (!std::isfinite(stats.critic_loss)) throw NumericError("train_batch: non-finite critic loss");
  nn::backward(critic, ws.critic_cache, (2.0 / B) * diff, ws.critic_back);
  const nn::ParamGrads critic_grads = ws.critic_back.grads;

  // Actor: ascend the critic's value of its own action (critic before its update).
  ActorLossResult a;
  actor_loss_into(*this, x, ws, a);
  if (!std::isfinite(a.loss)) throw NumericError("train_batch: non-finite actor loss");

  nn::adam_step(critic, critic_grads, critic_opt);
  nn::adam_step(actor, a.grads, actor_opt);
  stats.actor_loss = a.loss;
  stats.mean_q = q.mean();
  return stats;
}

void DdpgAgent::update_targets() {
  nn::polyak_update_inplace(actor_target, actor, config.tau);
  nn::polyak_update_inplace(critic_target, critic, config.tau);
}

void DdpgAgent::normalizer_update(const Mat& inputs) { normalizer.update(inputs); }

}  // namespace dtd
