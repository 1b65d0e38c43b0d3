#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dtd::nn {

enum class Activation { relu, tanh, linear };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Dense feed-forward network. Layer k maps layer_sizes[k] -> layer_sizes[k+1]
/// with weights[k] of shape (fan_out x fan_in).
struct MlpParams {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::linear;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;
  bool all_finite() const;
  bool same_architecture(const MlpParams& other) const;

  friend bool operator==(const MlpParams& a, const MlpParams& b);
};

/// Gradients with the same shapes as the parameters they belong to.
struct ParamGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static ParamGrads zeros_like(const MlpParams& params);
  bool all_finite() const;
};

/// Per-layer activations kept by a forward pass. Columns are samples.
/// post[0] is the input; pre[k] / post[k+1] are layer k's pre/post activation.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
};

struct BackwardResult {
  ParamGrads grads;
  Eigen::MatrixXd input_grad;
  std::vector<Eigen::MatrixXd> deltas;  // scratch, reused across calls
};

struct AdamState {
  ParamGrads first_moment;
  ParamGrads second_moment;
  std::uint64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_hat = 1e-8;

  static AdamState for_params(const MlpParams& params, double learning_rate,
                              double beta1 = 0.9, double beta2 = 0.999,
                              double epsilon_hat = 1e-8);
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
MlpParams mlp_init(std::span<const int> layer_sizes, Activation hidden, Activation output,
                   std::uint64_t seed);

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input,
                        ForwardCache* cache = nullptr);

/// Batched forward pass; each column of `inputs` is one sample. A cache that is
/// reused across calls keeps its buffers.
Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache = nullptr);

/// Gradients of sum_over_samples(output . upstream) w.r.t. every parameter and
/// the input. `upstream` has one column per sample of the cached forward pass.
BackwardResult backward(const MlpParams& params, const ForwardCache& cache,
                        const Eigen::MatrixXd& upstream);
/// Same, writing into `out` and reusing its buffers.
void backward(const MlpParams& params, const ForwardCache& cache, const Eigen::MatrixXd& upstream,
              BackwardResult& out);

/// In-place Adam update with bias correction. Throws NumericError and leaves
/// both params and state untouched if any gradient is non-finite.
void adam_step(MlpParams& params, const ParamGrads& grads, AdamState& state);

/// target <- tau * target + (1 - tau) * online
MlpParams polyak_update(const MlpParams& target, const MlpParams& online, double tau);
void polyak_update_inplace(MlpParams& target, const MlpParams& online, double tau);

}  // namespace dtd::nn
