#pragma once

// Fixed imitation reward built from a support scorer:
//   r(x) = exp(-σ₁ · score(x)),  r ∈ [0, 1]
// with σ₁ chosen so that expert pairs mostly receive rewards close to 1.

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "red/dataset.hpp"
#include "red/estimators.hpp"

namespace red {

struct CalibrationOptions {
  double target_reward = 0.9;  // ρ
  double quantile = 0.9;       // q
};

/// Nearest-rank quantile: the smallest sample with at least ceil(q·N) samples <= it.
double nearest_rank_quantile(std::span<const double> values, double q);

/// σ₁ = -ln(ρ) / quantile_q(losses); 1 when that quantile is zero.
double calibrate_sigma1(std::span<const double> expert_losses,
                        const CalibrationOptions& options = {});

/// σ₁ = +inf is the indicator limit: 1 when loss == 0, else 0.
double red_reward(double sigma1, double loss);

/// 1 - α₁·L, unclamped; used for reward maps only.
double viz_reward(double alpha1, double loss);

struct TerminalParams {
  double sigma2 = 1.0;  // penalty scale, >= 0
  double sigma3 = 0.5;  // trigger fraction of r̄, in [0, 1]

  void validate() const;
};

/// -σ₂·r̄ when the final-step reward falls below σ₃·r̄, else 0.
double terminal_reward(double mean_reward, const TerminalParams& params, double final_reward);

class RewardModel {
 public:
  RewardModel(ScorerPtr scorer, double sigma1, double mean_expert_reward,
              std::optional<TerminalParams> terminal = std::nullopt);

  double reward(const Vector& x) const { return red_reward(sigma1_, scorer_->score(x)); }
  Vector reward_batch(const Matrix& inputs) const;

  /// Episode-end adjustment; 0 when the heuristic is disabled.
  double terminal_adjustment(double final_step_reward) const;

  const SupportScorer& scorer() const { return *scorer_; }
  const ScorerPtr& scorer_ptr() const { return scorer_; }
  int input_dim() const { return scorer_->input_dim(); }
  double sigma1() const { return sigma1_; }
  double mean_expert_reward() const { return mean_expert_reward_; }
  const std::optional<TerminalParams>& terminal() const { return terminal_; }

 private:
  ScorerPtr scorer_;
  double sigma1_;
  double mean_expert_reward_;
  std::optional<TerminalParams> terminal_;
};

/// r̄ = mean over expert pairs of exp(-σ₁ · score).
double mean_expert_reward(const SupportScorer& scorer, double sigma1, const ExpertDataset& data);
double mean_expert_reward(const RewardModel& model, const ExpertDataset& data);

/// Scores the expert pairs, calibrates σ₁ on them and computes r̄.
RewardModel calibrate_reward(ScorerPtr scorer, const ExpertDataset& data,
                             const CalibrationOptions& options = {},
                             std::optional<TerminalParams> terminal = std::nullopt);

/// {"scorer_path", "sigma1" (number or "inf"), "mean_expert_reward", "sigma2", "sigma3", "terminal_enabled"}
nlohmann::json reward_model_json(const RewardModel& model, const std::filesystem::path& scorer_path);
/// Loads the referenced scorer file; relative paths resolve against `base_dir`.
RewardModel reward_model_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

}  // namespace red
