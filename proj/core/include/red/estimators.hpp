#pragma once

// Support scorers. Every scorer maps a joint state-action input to a
// non-negative score where lower means "closer to the expert's support".

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "red/dataset.hpp"
#include "red/kernel_support.hpp"
#include "red/nn.hpp"

namespace red {

class SupportScorer {
 public:
  virtual ~SupportScorer() = default;

  virtual double score(const Vector& x) const = 0;
  /// One score per column.
  virtual Vector score_batch(const Matrix& inputs) const;
  virtual int input_dim() const = 0;
  virtual std::string descriptor() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

using ScorerPtr = std::shared_ptr<const SupportScorer>;

/// Per-feature standardization fitted on expert inputs.
struct Normalizer {
  Vector mean;
  Vector std;

  static constexpr double kMinStd = 1e-8;

  /// Features with std below kMinStd get unit scale.
  static Normalizer fit(const Matrix& inputs);
  Matrix normalize(const Matrix& inputs) const;
  Matrix denormalize(const Matrix& normalized) const;
};

struct TrainingLog {
  int steps = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// ---------------------------------------------------------------------------
// Random network distillation

struct RndModel {
  MlpParams target;     // frozen, randomly initialised
  MlpParams predictor;  // trained to imitate the target on expert inputs
  Normalizer normalizer;
  TrainingLog log;

  int input_dim() const { return target.input_dim(); }
  int embedding_dim() const { return target.output_dim(); }
};

inline constexpr int kDefaultEstimatorSteps = 20000;
// Weight std multiplier for the frozen target. A smoother target keeps the
// predictor's error growing gradually off-support instead of saturating.
inline constexpr double kDefaultRndTargetInitScale = 0.5;

MlpSpec default_rnd_target_spec(int input_dim);     // input -> 64 -> 64 -> 32, tanh, init 0.5
MlpSpec default_rnd_predictor_spec(int input_dim);  // input -> 128 -> 128 -> 32, tanh

RndModel fit_rnd(const ExpertDataset& data, const MlpSpec& target_spec,
                 const MlpSpec& predictor_spec, int steps, std::uint64_t seed,
                 const AdamConfig& adam = {});

/// ‖f_predictor(z) - f_target(z)‖² with z the normalized input.
double rnd_score(const RndModel& model, const Vector& x);

// ---------------------------------------------------------------------------
// Overparametrized, weight-decayed autoencoder

struct AeModel {
  MlpParams net;
  double weight_decay = 1e-4;
  Normalizer normalizer;
  TrainingLog log;

  int input_dim() const { return net.input_dim(); }
};

inline constexpr double kDefaultAeWeightDecay = 1e-4;
// At 1e-3 the weight-decayed objective can stall on a plateau within the
// default step budget; 3e-4 converges reliably.
inline constexpr double kDefaultAeLearningRate = 3e-4;

MlpSpec default_ae_spec(int input_dim);  // input -> 128 -> 128 -> input, tanh

AeModel fit_autoencoder(const ExpertDataset& data, const MlpSpec& spec, double weight_decay,
                        int steps, std::uint64_t seed, const AdamConfig& adam = {});

/// Reconstruction error ‖f(z) - z‖² in normalized coordinates.
double ae_score(const AeModel& model, const Vector& x);

// ---------------------------------------------------------------------------
// Exact-set indicator for discrete spaces

struct ExactSupportModel {
  int input_dim = 0;
  std::set<std::vector<std::int64_t>> keys;
};

/// Throws NonDiscreteInput unless every coordinate is an exact integer.
std::vector<std::int64_t> discrete_key(const Vector& x);

ExactSupportModel fit_exact(const ExpertDataset& data);
/// 0 for a pair seen in training, 1 otherwise.
double exact_score(const ExactSupportModel& model, const Vector& x);

// ---------------------------------------------------------------------------
// Scorer adapters

class KernelScorer final : public SupportScorer {
 public:
  explicit KernelScorer(KernelSupportModel model) : model_(std::move(model)) {}
  double score(const Vector& x) const override { return kernel_score(model_, x); }
  int input_dim() const override { return model_.input_dim(); }
  std::string descriptor() const override;
  nlohmann::json to_json() const override;
  const KernelSupportModel& model() const { return model_; }

 private:
  KernelSupportModel model_;
};

class RndScorer final : public SupportScorer {
 public:
  explicit RndScorer(RndModel model) : model_(std::move(model)) {}
  double score(const Vector& x) const override { return rnd_score(model_, x); }
  Vector score_batch(const Matrix& inputs) const override;
  int input_dim() const override { return model_.input_dim(); }
  std::string descriptor() const override;
  nlohmann::json to_json() const override;
  const RndModel& model() const { return model_; }

 private:
  RndModel model_;
};

class AeScorer final : public SupportScorer {
 public:
  explicit AeScorer(AeModel model) : model_(std::move(model)) {}
  double score(const Vector& x) const override { return ae_score(model_, x); }
  Vector score_batch(const Matrix& inputs) const override;
  int input_dim() const override { return model_.input_dim(); }
  std::string descriptor() const override;
  nlohmann::json to_json() const override;
  const AeModel& model() const { return model_; }

 private:
  AeModel model_;
};

class ExactScorer final : public SupportScorer {
 public:
  explicit ExactScorer(ExactSupportModel model) : model_(std::move(model)) {}
  double score(const Vector& x) const override { return exact_score(model_, x); }
  int input_dim() const override { return model_.input_dim; }
  std::string descriptor() const override;
  nlohmann::json to_json() const override;

 private:
  ExactSupportModel model_;
};

/// Same score everywhere; a flat (uninformative) reward baseline.
class ConstantScorer final : public SupportScorer {
 public:
  ConstantScorer(int input_dim, double value) : input_dim_(input_dim), value_(value) {}
  double score(const Vector& x) const override;
  int input_dim() const override { return input_dim_; }
  std::string descriptor() const override;
  nlohmann::json to_json() const override;

 private:
  int input_dim_;
  double value_;
};

/// Rebuilds any scorer written by SupportScorer::to_json.
ScorerPtr scorer_from_json(const nlohmann::json& j);

}  // namespace red
