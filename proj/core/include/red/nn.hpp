#pragma once

// Fixed-topology multilayer perceptrons with hand-written backprop and Adam.
//
// Batches are column-major: a matrix of shape (dim x batch) holds one sample
// per column, so a layer is a single W * X product.

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace red {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { tanh, relu };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;
  Activation activation = Activation::tanh;  // hidden layers only
  double init_scale = 1.0;                   // weight std = init_scale / sqrt(fan_in)

  /// Throws Error{"InvalidSpec"} on non-positive sizes or scale.
  void validate() const;
  /// input, hidden..., output
  std::vector<int> dims() const;

  bool operator==(const MlpSpec&) const = default;
};

struct Layer {
  Matrix w;  // (fan_out x fan_in)
  Vector b;  // fan_out
};

struct MlpParams {
  MlpSpec spec;
  std::vector<Layer> layers;

  int input_dim() const { return spec.input_dim; }
  int output_dim() const { return spec.output_dim; }
  bool operator==(const MlpParams& other) const;
};

/// Gradient (or Adam moment) with the same layer shapes as the parameters.
struct MlpGradient {
  std::vector<Layer> layers;

  static MlpGradient zeros_like(const MlpParams& params);
  MlpGradient& operator+=(const MlpGradient& other);
};

/// Post-activation outputs of every layer, kept for backprop.
struct ForwardCache {
  std::vector<Matrix> activations;  // activations[0] is the input batch
};

MlpParams mlp_init(const MlpSpec& spec, std::uint64_t seed);

Vector mlp_forward(const MlpParams& params, const Vector& x);
Matrix mlp_forward_batch(const MlpParams& params, const Matrix& inputs);
Matrix mlp_forward_cached(const MlpParams& params, const Matrix& inputs, ForwardCache& cache);

/// Backpropagates dL/d(output) (output_dim x batch) through a cached forward pass.
MlpGradient mlp_backward(const MlpParams& params, const ForwardCache& cache,
                         const Matrix& output_grad);

/// Gradient of (1/B) * sum_b ||f(x_b) - t_b||^2. Returns the loss alongside.
std::pair<MlpGradient, double> mlp_mse_grad(const MlpParams& params, const Matrix& inputs,
                                            const Matrix& targets);

struct Sample {
  Vector x;
  Vector target;
};

MlpGradient mlp_grad(const MlpParams& params, const std::vector<Sample>& batch);

double mse_loss(const MlpParams& params, const Matrix& inputs, const Matrix& targets);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  MlpGradient first_moment;
  MlpGradient second_moment;

  static AdamState fresh(const MlpParams& params, AdamConfig config = {});
};

/// In-place update used by training loops.
void adam_update(AdamState& state, MlpParams& params, const MlpGradient& grad);

/// Value-semantics form: consumes and returns the state and parameters.
std::pair<AdamState, MlpParams> adam_step(AdamState state, MlpParams params,
                                          const MlpGradient& grad);

/// Max over parameters of |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
/// using central differences of the MSE loss.
double finite_diff_check(const MlpParams& params, const Matrix& inputs, const Matrix& targets,
                         double h);

nlohmann::json to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MlpParams& params);
MlpParams mlp_params_from_json(const nlohmann::json& j);

}  // namespace red
