#include "dtd/nn.hpp"

#include "dtd/errors.hpp"

#include <cmath>
#include <random>
#include <string>

namespace dtd::nn {

namespace {

// Multiplies `grad` (dL/d post) by d post / d pre in place.
void apply_derivative(Activation a, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& post,
                      Eigen::MatrixXd& grad) {
  switch (a) {
    case Activation::relu:
      grad.array() *= (pre.array() > 0.0).cast<double>();
      return;
    case Activation::tanh:
      grad.array() *= 1.0 - post.array().square();
      return;
    case Activation::linear:
      return;
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::linear:
      return "linear";
  }
  return "linear";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "linear") return Activation::linear;
  throw InvalidArchitecture("unknown activation '" + std::string(name) + "'");
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    n += static_cast<std::size_t>(weights[k].size() + biases[k].size());
  }
  return n;
}

bool MlpParams::all_finite() const {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!weights[k].allFinite() || !biases[k].allFinite()) return false;
  }
  return true;
}

bool MlpParams::same_architecture(const MlpParams& other) const {
  return layer_sizes == other.layer_sizes && hidden_activation == other.hidden_activation &&
         output_activation == other.output_activation;
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (!a.same_architecture(b)) return false;
  for (std::size_t k = 0; k < a.weights.size(); ++k) {
    if (a.weights[k] != b.weights[k] || a.biases[k] != b.biases[k]) return false;
  }
  return true;
}

ParamGrads ParamGrads::zeros_like(const MlpParams& params) {
  ParamGrads g;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    g.weights.push_back(Eigen::MatrixXd::Zero(params.weights[k].rows(), params.weights[k].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(params.biases[k].size()));
  }
  return g;
}

bool ParamGrads::all_finite() const {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!weights[k].allFinite() || !biases[k].allFinite()) return false;
  }
  return true;
}

AdamState AdamState::for_params(const MlpParams& params, double learning_rate, double beta1,
                                double beta2, double epsilon_hat) {
  AdamState s;
  s.first_moment = ParamGrads::zeros_like(params);
  s.second_moment = ParamGrads::zeros_like(params);
  s.learning_rate = learning_rate;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon_hat = epsilon_hat;
  return s;
}

MlpParams mlp_init(std::span<const int> layer_sizes, Activation hidden, Activation output,
                   std::uint64_t seed) {
  if (layer_sizes.size() < 2) {
    throw InvalidArchitecture("an MLP needs at least an input and an output layer");
  }
  for (int w : layer_sizes) {
    if (w < 1) throw InvalidArchitecture("layer widths must be positive");
  }
  MlpParams p;
  p.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  p.hidden_activation = hidden;
  p.output_activation = output;

  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    const int fan_in = layer_sizes[k];
    const int fan_out = layer_sizes[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(fan_out, fan_in);
    // Row-major fill so the draw order does not depend on Eigen's storage order.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = dist(rng);
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return p;
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache) {
  if (inputs.rows() != params.input_size()) {
    throw DimensionMismatch("forward: input has " + std::to_string(inputs.rows()) +
                            " rows, network expects " + std::to_string(params.input_size()));
  }
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  const std::size_t L = params.num_layers();
  c.pre.resize(L);
  c.post.resize(L + 1);
  c.post[0] = inputs;
  for (std::size_t k = 0; k < L; ++k) {
    Eigen::MatrixXd& z = c.pre[k];
    z.noalias() = params.weights[k] * c.post[k];
    z.colwise() += params.biases[k];
    const Activation act = (k + 1 == L) ? params.output_activation : params.hidden_activation;
    Eigen::MatrixXd& a = c.post[k + 1];
    switch (act) {
      case Activation::relu:
        a = z.cwiseMax(0.0);
        break;
      case Activation::tanh:
        a = z.array().tanh().matrix();
        break;
      case Activation::linear:
        a = z;
        break;
    }
  }
  return c.post[L];
}

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input,
                        ForwardCache* cache) {
  return forward_batch(params, Eigen::MatrixXd(input), cache).col(0);
}

void backward(const MlpParams& params, const ForwardCache& cache, const Eigen::MatrixXd& upstream,
              BackwardResult& out) {
  const std::size_t L = params.num_layers();
  if (cache.pre.size() != L || cache.post.size() != L + 1) {
    throw DimensionMismatch("backward: cache does not match network depth");
  }
  if (upstream.rows() != params.output_size() || upstream.cols() != cache.post.back().cols()) {
    throw DimensionMismatch("backward: upstream gradient shape does not match cached output");
  }
  out.grads.weights.resize(L);
  out.grads.biases.resize(L);
  // deltas[k] holds the gradient w.r.t. post[k], then (in place) w.r.t. pre[k-1].
  out.deltas.resize(L + 1);
  out.deltas[L] = upstream;
  for (std::size_t k = L; k-- > 0;) {
    Eigen::MatrixXd& delta = out.deltas[k + 1];
    const Activation act = (k + 1 == L) ? params.output_activation : params.hidden_activation;
    apply_derivative(act, cache.pre[k], cache.post[k + 1], delta);
    out.grads.weights[k].noalias() = delta * cache.post[k].transpose();
    out.grads.biases[k] = delta.rowwise().sum();
    out.deltas[k].noalias() = params.weights[k].transpose() * delta;
  }
  out.input_grad = out.deltas[0];
}

BackwardResult backward(const MlpParams& params, const ForwardCache& cache,
                        const Eigen::MatrixXd& upstream) {
  BackwardResult out;
  backward(params, cache, upstream, out);
  return out;
}

void adam_step(MlpParams& params, const ParamGrads& grads, AdamState& state) {
  if (grads.weights.size() != params.weights.size() ||
      state.first_moment.weights.size() != params.weights.size()) {
    throw DimensionMismatch("adam_step: gradient/state layer count mismatch");
  }
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    if (grads.weights[k].rows() != params.weights[k].rows() ||
        grads.weights[k].cols() != params.weights[k].cols() ||
        grads.biases[k].size() != params.biases[k].size()) {
      throw DimensionMismatch("adam_step: gradient shape mismatch in layer " + std::to_string(k));
    }
  }
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double lr = state.learning_rate;
  const double eps = state.epsilon_hat;

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    update(params.weights[k], grads.weights[k], state.first_moment.weights[k],
           state.second_moment.weights[k]);
    update(params.biases[k], grads.biases[k], state.first_moment.biases[k],
           state.second_moment.biases[k]);
  }
}

void polyak_update_inplace(MlpParams& target, const MlpParams& online, double tau) {
  if (!target.same_architecture(online)) {
    throw InvalidArchitecture("polyak_update: target and online architectures differ");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error("polyak_update: tau must lie in [0, 1]");
  if (tau == 1.0) return;
  if (tau == 0.0) {
    target = online;
    return;
  }
  // Blend, then clamp to the segment so rounding never leaves [target, online].
  const double w = 1.0 - tau;
  auto blend = [w](auto& t, const auto& o) {
    const auto lo = t.cwiseMin(o).eval();
    const auto hi = t.cwiseMax(o).eval();
    t = (t + w * (o - t)).cwiseMax(lo).cwiseMin(hi);
  };
  for (std::size_t k = 0; k < target.weights.size(); ++k) {
    blend(target.weights[k], online.weights[k]);
    blend(target.biases[k], online.biases[k]);
  }
}

MlpParams polyak_update(const MlpParams& target, const MlpParams& online, double tau) {
  MlpParams out = target;
  polyak_update_inplace(out, online, tau);
  return out;
}

}  // namespace dtd::nn
