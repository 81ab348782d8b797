#include "red/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "red/error.hpp"

namespace red {

namespace {

void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::tanh:
      z = z.array().tanh();
      break;
    case Activation::relu:
      z = z.array().max(0.0);
      break;
  }
}

// Derivative expressed through the activation output a = act(z).
void scale_by_activation_grad(Activation act, const Matrix& a, Matrix& grad) {
  switch (act) {
    case Activation::tanh:
      grad.array() *= 1.0 - a.array().square();
      break;
    case Activation::relu:
      grad.array() *= (a.array() > 0.0).cast<double>();
      break;
  }
}

void check_input(const MlpParams& params, Eigen::Index rows) {
  if (rows != params.spec.input_dim) {
    fail("ShapeMismatch", "network expects input dim " + std::to_string(params.spec.input_dim) +
                              ", got " + std::to_string(rows));
  }
}

void check_same_shape(const MlpParams& params, const MlpGradient& grad) {
  bool ok = grad.layers.size() == params.layers.size();
  for (std::size_t i = 0; ok && i < grad.layers.size(); ++i) {
    ok = grad.layers[i].w.rows() == params.layers[i].w.rows() &&
         grad.layers[i].w.cols() == params.layers[i].w.cols() &&
         grad.layers[i].b.size() == params.layers[i].b.size();
  }
  require(ok, "ShapeMismatch", "gradient does not match parameter shapes");
}

}  // namespace

const char* to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "relu";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  fail("InvalidSpec", "unknown activation '" + name + "'");
}

void MlpSpec::validate() const {
  require(input_dim >= 1 && output_dim >= 1, "InvalidSpec", "input/output dims must be >= 1");
  for (int h : hidden_dims) require(h >= 1, "InvalidSpec", "hidden dims must be >= 1");
  require(init_scale > 0.0 && std::isfinite(init_scale), "InvalidSpec",
          "init_scale must be positive");
}

std::vector<int> MlpSpec::dims() const {
  std::vector<int> d;
  d.reserve(hidden_dims.size() + 2);
  d.push_back(input_dim);
  d.insert(d.end(), hidden_dims.begin(), hidden_dims.end());
  d.push_back(output_dim);
  return d;
}

bool MlpParams::operator==(const MlpParams& other) const {
  if (!(spec == other.spec) || layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].w != other.layers[i].w || layers[i].b != other.layers[i].b) return false;
  }
  return true;
}

MlpGradient MlpGradient::zeros_like(const MlpParams& params) {
  MlpGradient g;
  g.layers.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    g.layers.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size())});
  }
  return g;
}

MlpGradient& MlpGradient::operator+=(const MlpGradient& other) {
  require(layers.size() == other.layers.size(), "ShapeMismatch", "gradient layer count");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].w += other.layers[i].w;
    layers[i].b += other.layers[i].b;
  }
  return *this;
}

MlpParams mlp_init(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto dims = spec.dims();
  MlpParams params{spec, {}};
  params.layers.reserve(dims.size() - 1);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double std_dev = spec.init_scale / std::sqrt(static_cast<double>(dims[i]));
    Layer layer{Matrix(dims[i + 1], dims[i]), Vector::Zero(dims[i + 1])};
    // Fill in a fixed (row-major) order so results do not depend on storage.
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = std_dev * normal(rng);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Matrix mlp_forward_batch(const MlpParams& params, const Matrix& inputs) {
  check_input(params, inputs.rows());
  Matrix a = inputs;
  const std::size_t n = params.layers.size();
  for (std::size_t i = 0; i < n; ++i) {
    Matrix z = params.layers[i].w * a;
    z.colwise() += params.layers[i].b;
    if (i + 1 < n) apply_activation(params.spec.activation, z);
    a = std::move(z);
  }
  return a;
}

Vector mlp_forward(const MlpParams& params, const Vector& x) {
  return mlp_forward_batch(params, x);
}

Matrix mlp_forward_cached(const MlpParams& params, const Matrix& inputs, ForwardCache& cache) {
  check_input(params, inputs.rows());
  const std::size_t n = params.layers.size();
  cache.activations.resize(n + 1);
  cache.activations[0] = inputs;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix& z = cache.activations[i + 1];
    z.noalias() = params.layers[i].w * cache.activations[i];
    z.colwise() += params.layers[i].b;
    if (i + 1 < n) apply_activation(params.spec.activation, z);
  }
  return cache.activations[n];
}

MlpGradient mlp_backward(const MlpParams& params, const ForwardCache& cache,
                         const Matrix& output_grad) {
  const std::size_t n = params.layers.size();
  require(cache.activations.size() == n + 1, "ShapeMismatch", "forward cache does not match");
  require(output_grad.rows() == params.spec.output_dim &&
              output_grad.cols() == cache.activations[n].cols(),
          "ShapeMismatch", "output gradient shape");
  MlpGradient grad;
  grad.layers.resize(n);
  Matrix delta = output_grad;
  for (std::size_t k = n; k-- > 0;) {
    if (k + 1 < n) scale_by_activation_grad(params.spec.activation, cache.activations[k + 1], delta);
    grad.layers[k].w.noalias() = delta * cache.activations[k].transpose();
    grad.layers[k].b = delta.rowwise().sum();
    if (k > 0) {
      Matrix prev = params.layers[k].w.transpose() * delta;
      delta = std::move(prev);
    }
  }
  return grad;
}

std::pair<MlpGradient, double> mlp_mse_grad(const MlpParams& params, const Matrix& inputs,
                                            const Matrix& targets) {
  require(inputs.cols() >= 1, "ShapeMismatch", "empty batch");
  require(targets.rows() == params.spec.output_dim && targets.cols() == inputs.cols(),
          "ShapeMismatch", "target shape does not match network output");
  ForwardCache cache;
  const Matrix residual = mlp_forward_cached(params, inputs, cache) - targets;
  const double batch = static_cast<double>(inputs.cols());
  const double loss = residual.squaredNorm() / batch;
  return {mlp_backward(params, cache, (2.0 / batch) * residual), loss};
}

MlpGradient mlp_grad(const MlpParams& params, const std::vector<Sample>& batch) {
  require(!batch.empty(), "ShapeMismatch", "empty batch");
  Matrix inputs(params.spec.input_dim, static_cast<Eigen::Index>(batch.size()));
  Matrix targets(params.spec.output_dim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    check_input(params, batch[i].x.size());
    require(batch[i].target.size() == params.spec.output_dim, "ShapeMismatch",
            "target dim does not match output dim");
    inputs.col(static_cast<Eigen::Index>(i)) = batch[i].x;
    targets.col(static_cast<Eigen::Index>(i)) = batch[i].target;
  }
  return mlp_mse_grad(params, inputs, targets).first;
}

double mse_loss(const MlpParams& params, const Matrix& inputs, const Matrix& targets) {
  require(targets.cols() == inputs.cols(), "ShapeMismatch", "batch sizes differ");
  return (mlp_forward_batch(params, inputs) - targets).squaredNorm() /
         static_cast<double>(inputs.cols());
}

AdamState AdamState::fresh(const MlpParams& params, AdamConfig config) {
  return AdamState{config, 0, MlpGradient::zeros_like(params), MlpGradient::zeros_like(params)};
}

void adam_update(AdamState& state, MlpParams& params, const MlpGradient& grad) {
  check_same_shape(params, grad);
  check_same_shape(params, state.first_moment);
  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  const double step_size = c.lr / bias1;
  const double inv_sqrt_bias2 = 1.0 / std::sqrt(bias2);

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
    p.array() -= step_size * m.array() / (v.array().sqrt() * inv_sqrt_bias2 + c.eps);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].w, state.first_moment.layers[i].w, state.second_moment.layers[i].w,
           grad.layers[i].w);
    update(params.layers[i].b, state.first_moment.layers[i].b, state.second_moment.layers[i].b,
           grad.layers[i].b);
  }
}

std::pair<AdamState, MlpParams> adam_step(AdamState state, MlpParams params,
                                          const MlpGradient& grad) {
  adam_update(state, params, grad);
  return {std::move(state), std::move(params)};
}

double finite_diff_check(const MlpParams& params, const Matrix& inputs, const Matrix& targets,
                         double h) {
  require(h > 0.0, "InvalidStep", "finite-difference step must be positive");
  const MlpGradient analytic = mlp_mse_grad(params, inputs, targets).first;
  MlpParams probe = params;
  double worst = 0.0;
  auto check = [&](double& slot, double exact) {
    const double saved = slot;
    slot = saved + h;
    const double up = mse_loss(probe, inputs, targets);
    slot = saved - h;
    const double down = mse_loss(probe, inputs, targets);
    slot = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double rel =
        std::abs(exact - numeric) / std::max(1e-8, std::abs(exact) + std::abs(numeric));
    worst = std::max(worst, rel);
  };
  for (std::size_t i = 0; i < probe.layers.size(); ++i) {
    auto& layer = probe.layers[i];
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) check(layer.w(r, c), analytic.layers[i].w(r, c));
    }
    for (Eigen::Index r = 0; r < layer.b.size(); ++r) check(layer.b(r), analytic.layers[i].b(r));
  }
  return worst;
}

nlohmann::json to_json(const MlpSpec& spec) {
  return {{"input_dim", spec.input_dim},
          {"hidden_dims", spec.hidden_dims},
          {"output_dim", spec.output_dim},
          {"activation", to_string(spec.activation)},
          {"init_scale", spec.init_scale}};
}

MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.input_dim = j.at("input_dim").get<int>();
  spec.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
  spec.output_dim = j.at("output_dim").get<int>();
  spec.activation = activation_from_string(j.at("activation").get<std::string>());
  spec.init_scale = j.at("init_scale").get<double>();
  spec.validate();
  return spec;
}

nlohmann::json to_json(const MlpParams& params) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.layers) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(l.w.cols()));
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) row[static_cast<std::size_t>(c)] = l.w(r, c);
      rows.push_back(std::move(row));
    }
    layers.push_back({{"w", std::move(rows)},
                      {"b", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
  }
  return {{"spec", to_json(params.spec)}, {"layers", std::move(layers)}, {"format_version", 1}};
}

MlpParams mlp_params_from_json(const nlohmann::json& j) {
  require(j.value("format_version", 0) == 1, "UnsupportedFormat", "mlp format_version must be 1");
  MlpParams params{mlp_spec_from_json(j.at("spec")), {}};
  const auto dims = params.spec.dims();
  const auto& layers = j.at("layers");
  require(layers.size() + 1 == dims.size(), "ShapeMismatch", "layer count does not match spec");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto rows = layers[i].at("w").get<std::vector<std::vector<double>>>();
    const auto bias = layers[i].at("b").get<std::vector<double>>();
    require(rows.size() == static_cast<std::size_t>(dims[i + 1]) &&
                bias.size() == static_cast<std::size_t>(dims[i + 1]),
            "ShapeMismatch", "layer " + std::to_string(i) + " rows");
    Layer layer{Matrix(dims[i + 1], dims[i]), Vector(dims[i + 1])};
    for (std::size_t r = 0; r < rows.size(); ++r) {
      require(rows[r].size() == static_cast<std::size_t>(dims[i]), "ShapeMismatch",
              "layer " + std::to_string(i) + " cols");
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        layer.w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
      layer.b(static_cast<Eigen::Index>(r)) = bias[r];
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

}  // namespace red
