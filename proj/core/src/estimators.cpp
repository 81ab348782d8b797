#include "red/estimators.hpp"

#include <cmath>

#include "red/error.hpp"
#include "red/seed.hpp"

namespace red {

namespace {

nlohmann::json vector_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

nlohmann::json normalizer_json(const Normalizer& n) {
  return {{"mean", vector_json(n.mean)}, {"std", vector_json(n.std)}};
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
  Normalizer n{vector_from_json(j.at("mean")), vector_from_json(j.at("std"))};
  require(n.mean.size() == n.std.size(), "ShapeMismatch", "normalizer mean/std lengths differ");
  require((n.std.array() >= Normalizer::kMinStd).all(), "InvalidModel", "normalizer std too small");
  return n;
}

nlohmann::json log_json(const TrainingLog& log) {
  return {{"steps", log.steps}, {"initial_loss", log.initial_loss}, {"final_loss", log.final_loss}};
}

TrainingLog log_from_json(const nlohmann::json& j) {
  return {j.at("steps").get<int>(), j.at("initial_loss").get<double>(),
          j.at("final_loss").get<double>()};
}

Matrix checked_expert_inputs(const ExpertDataset& data) {
  require(data.size() >= 1, "EmptyDataset", "expert dataset has no pairs");
  data.validate();
  return data.joint_inputs();
}

void check_dim(int expected, Eigen::Index got) {
  require(got == expected, "ShapeMismatch",
          "scorer expects input dim " + std::to_string(expected) + ", got " + std::to_string(got));
}

}  // namespace

Vector SupportScorer::score_batch(const Matrix& inputs) const {
  Vector out(inputs.cols());
  for (Eigen::Index i = 0; i < inputs.cols(); ++i) out(i) = score(inputs.col(i));
  return out;
}

Normalizer Normalizer::fit(const Matrix& inputs) {
  require(inputs.cols() >= 1, "EmptyDataset", "cannot fit a normalizer on no data");
  Normalizer n;
  n.mean = inputs.rowwise().mean();
  const Matrix centered = inputs.colwise() - n.mean;
  n.std = (centered.array().square().rowwise().sum() / static_cast<double>(inputs.cols())).sqrt();
  for (Eigen::Index i = 0; i < n.std.size(); ++i) {
    if (!(n.std(i) >= kMinStd)) n.std(i) = 1.0;
  }
  return n;
}

Matrix Normalizer::normalize(const Matrix& inputs) const {
  check_dim(static_cast<int>(mean.size()), inputs.rows());
  return (inputs.colwise() - mean).array().colwise() / std.array();
}

Matrix Normalizer::denormalize(const Matrix& normalized) const {
  check_dim(static_cast<int>(mean.size()), normalized.rows());
  return (normalized.array().colwise() * std.array()).matrix().colwise() + mean;
}

// ---------------------------------------------------------------------------

MlpSpec default_rnd_target_spec(int input_dim) {
  return MlpSpec{input_dim, {64, 64}, 32, Activation::tanh, kDefaultRndTargetInitScale};
}

MlpSpec default_rnd_predictor_spec(int input_dim) {
  return MlpSpec{input_dim, {128, 128}, 32, Activation::tanh, 1.0};
}

RndModel fit_rnd(const ExpertDataset& data, const MlpSpec& target_spec,
                 const MlpSpec& predictor_spec, int steps, std::uint64_t seed,
                 const AdamConfig& adam) {
  const Matrix raw = checked_expert_inputs(data);
  target_spec.validate();
  predictor_spec.validate();
  require(target_spec.input_dim == predictor_spec.input_dim &&
              target_spec.output_dim == predictor_spec.output_dim,
          "ShapeMismatch", "target and predictor must share input and output dims");
  check_dim(target_spec.input_dim, raw.rows());
  require(steps >= 0, "InvalidConfig", "steps must be >= 0");

  RndModel model{mlp_init(target_spec, derive_seed(seed, "rnd.target")),
                 mlp_init(predictor_spec, derive_seed(seed, "rnd.predictor")),
                 Normalizer::fit(raw),
                 {}};
  const Matrix inputs = model.normalizer.normalize(raw);
  const Matrix targets = mlp_forward_batch(model.target, inputs);

  AdamState state = AdamState::fresh(model.predictor, adam);
  model.log.steps = steps;
  model.log.initial_loss = mse_loss(model.predictor, inputs, targets);
  for (int step = 0; step < steps; ++step) {
    auto grad = mlp_mse_grad(model.predictor, inputs, targets).first;
    adam_update(state, model.predictor, grad);
  }
  model.log.final_loss = mse_loss(model.predictor, inputs, targets);
  return model;
}

double rnd_score(const RndModel& model, const Vector& x) {
  check_dim(model.input_dim(), x.size());
  const Matrix z = model.normalizer.normalize(x);
  return (mlp_forward_batch(model.predictor, z) - mlp_forward_batch(model.target, z)).squaredNorm();
}

Vector RndScorer::score_batch(const Matrix& inputs) const {
  check_dim(model_.input_dim(), inputs.rows());
  const Matrix z = model_.normalizer.normalize(inputs);
  return (mlp_forward_batch(model_.predictor, z) - mlp_forward_batch(model_.target, z))
      .colwise()
      .squaredNorm()
      .transpose();
}

std::string RndScorer::descriptor() const {
  return "rnd(embedding=" + std::to_string(model_.embedding_dim()) +
         ", steps=" + std::to_string(model_.log.steps) + ")";
}

nlohmann::json RndScorer::to_json() const {
  return {{"kind", "rnd"},
          {"descriptor", descriptor()},
          {"target", red::to_json(model_.target)},
          {"predictor", red::to_json(model_.predictor)},
          {"normalizer", normalizer_json(model_.normalizer)},
          {"training", log_json(model_.log)},
          {"format_version", 1}};
}

// ---------------------------------------------------------------------------

MlpSpec default_ae_spec(int input_dim) {
  return MlpSpec{input_dim, {128, 128}, input_dim, Activation::tanh, 1.0};
}

AeModel fit_autoencoder(const ExpertDataset& data, const MlpSpec& spec, double weight_decay,
                        int steps, std::uint64_t seed, const AdamConfig& adam) {
  spec.validate();
  require(spec.output_dim == spec.input_dim, "ShapeMismatch",
          "autoencoder output dim must equal its input dim");
  for (int h : spec.hidden_dims) {
    require(h >= spec.input_dim, "BottleneckSpec",
            "hidden width " + std::to_string(h) + " is below the input dim " +
                std::to_string(spec.input_dim));
  }
  require(weight_decay > 0.0, "RegularizationRequired",
          "an overparametrized autoencoder needs a positive l2 weight penalty");
  require(steps >= 0, "InvalidConfig", "steps must be >= 0");
  const Matrix raw = checked_expert_inputs(data);
  check_dim(spec.input_dim, raw.rows());

  AeModel model{mlp_init(spec, derive_seed(seed, "ae.net")), weight_decay, Normalizer::fit(raw), {}};
  const Matrix inputs = model.normalizer.normalize(raw);

  auto objective = [&](const MlpParams& net) {
    double penalty = 0.0;
    for (const auto& l : net.layers) penalty += l.w.squaredNorm();
    return mse_loss(net, inputs, inputs) + weight_decay * penalty;
  };

  AdamState state = AdamState::fresh(model.net, adam);
  model.log.steps = steps;
  model.log.initial_loss = objective(model.net);
  for (int step = 0; step < steps; ++step) {
    auto grad = mlp_mse_grad(model.net, inputs, inputs).first;
    for (std::size_t i = 0; i < grad.layers.size(); ++i) {
      grad.layers[i].w += (2.0 * weight_decay) * model.net.layers[i].w;
    }
    adam_update(state, model.net, grad);
  }
  model.log.final_loss = objective(model.net);
  return model;
}

double ae_score(const AeModel& model, const Vector& x) {
  check_dim(model.input_dim(), x.size());
  const Matrix z = model.normalizer.normalize(x);
  return (mlp_forward_batch(model.net, z) - z).squaredNorm();
}

Vector AeScorer::score_batch(const Matrix& inputs) const {
  check_dim(model_.input_dim(), inputs.rows());
  const Matrix z = model_.normalizer.normalize(inputs);
  return (mlp_forward_batch(model_.net, z) - z).colwise().squaredNorm().transpose();
}

std::string AeScorer::descriptor() const {
  return "ae(weight_decay=" + std::to_string(model_.weight_decay) +
         ", steps=" + std::to_string(model_.log.steps) + ")";
}

nlohmann::json AeScorer::to_json() const {
  return {{"kind", "ae"},
          {"descriptor", descriptor()},
          {"net", red::to_json(model_.net)},
          {"weight_decay", model_.weight_decay},
          {"normalizer", normalizer_json(model_.normalizer)},
          {"training", log_json(model_.log)},
          {"format_version", 1}};
}

// ---------------------------------------------------------------------------

std::vector<std::int64_t> discrete_key(const Vector& x) {
  std::vector<std::int64_t> key(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    if (!std::isfinite(v) || v != std::nearbyint(v) || std::abs(v) > 9.0e15) {
      fail("NonDiscreteInput", "coordinate " + std::to_string(i) + " is not an integer");
    }
    key[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(v);
  }
  return key;
}

ExactSupportModel fit_exact(const ExpertDataset& data) {
  const Matrix inputs = checked_expert_inputs(data);
  ExactSupportModel model{static_cast<int>(inputs.rows()), {}};
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) model.keys.insert(discrete_key(inputs.col(c)));
  return model;
}

double exact_score(const ExactSupportModel& model, const Vector& x) {
  check_dim(model.input_dim, x.size());
  return model.keys.contains(discrete_key(x)) ? 0.0 : 1.0;
}

std::string ExactScorer::descriptor() const {
  return "exact(pairs=" + std::to_string(model_.keys.size()) + ")";
}

nlohmann::json ExactScorer::to_json() const {
  nlohmann::json keys = nlohmann::json::array();
  for (const auto& k : model_.keys) keys.push_back(k);
  return {{"kind", "exact"},
          {"descriptor", descriptor()},
          {"input_dim", model_.input_dim},
          {"keys", std::move(keys)},
          {"format_version", 1}};
}

// ---------------------------------------------------------------------------

std::string KernelScorer::descriptor() const {
  return std::string("kernel(") + red::to_string(model_.spec.exponent) +
         ", m=" + std::to_string(model_.m()) + ")";
}

nlohmann::json KernelScorer::to_json() const {
  auto j = red::to_json(model_);
  j["kind"] = "kernel";
  j["descriptor"] = descriptor();
  return j;
}

double ConstantScorer::score(const Vector& x) const {
  check_dim(input_dim_, x.size());
  return value_;
}

std::string ConstantScorer::descriptor() const {
  return "constant(" + std::to_string(value_) + ")";
}

nlohmann::json ConstantScorer::to_json() const {
  return {{"kind", "constant"},
          {"descriptor", descriptor()},
          {"input_dim", input_dim_},
          {"value", value_},
          {"format_version", 1}};
}

ScorerPtr scorer_from_json(const nlohmann::json& j) {
  try {
    require(j.value("format_version", 0) == 1, "UnsupportedFormat", "scorer format_version must be 1");
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "kernel") return std::make_shared<KernelScorer>(kernel_model_from_json(j));
    if (kind == "rnd") {
      RndModel m{mlp_params_from_json(j.at("target")), mlp_params_from_json(j.at("predictor")),
                 normalizer_from_json(j.at("normalizer")), log_from_json(j.at("training"))};
      require(m.target.input_dim() == m.predictor.input_dim() &&
                  m.target.output_dim() == m.predictor.output_dim() &&
                  m.normalizer.mean.size() == m.target.input_dim(),
              "ShapeMismatch", "inconsistent rnd model");
      return std::make_shared<RndScorer>(std::move(m));
    }
    if (kind == "ae") {
      AeModel m{mlp_params_from_json(j.at("net")), j.at("weight_decay").get<double>(),
                normalizer_from_json(j.at("normalizer")), log_from_json(j.at("training"))};
      require(m.net.input_dim() == m.net.output_dim() &&
                  m.normalizer.mean.size() == m.net.input_dim(),
              "ShapeMismatch", "inconsistent autoencoder model");
      return std::make_shared<AeScorer>(std::move(m));
    }
    if (kind == "exact") {
      ExactSupportModel m{j.at("input_dim").get<int>(), {}};
      for (const auto& k : j.at("keys")) {
        auto key = k.get<std::vector<std::int64_t>>();
        require(static_cast<int>(key.size()) == m.input_dim, "ShapeMismatch", "exact key width");
        m.keys.insert(std::move(key));
      }
      return std::make_shared<ExactScorer>(std::move(m));
    }
    if (kind == "constant") {
      return std::make_shared<ConstantScorer>(j.at("input_dim").get<int>(), j.at("value").get<double>());
    }
    fail("InvalidModel", "unknown scorer kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    fail("InvalidModel", std::string("malformed scorer JSON: ") + e.what());
  }
}

}  // namespace red
