#include "red/reward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "red/error.hpp"

namespace red {

double nearest_rank_quantile(std::span<const double> values, double q) {
  require(!values.empty(), "EmptyLosses", "quantile of an empty list");
  require(q > 0.0 && q <= 1.0, "InvalidQuantile", "quantile must lie in (0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

double calibrate_sigma1(std::span<const double> expert_losses, const CalibrationOptions& options) {
  require(!expert_losses.empty(), "EmptyLosses", "no expert losses to calibrate on");
  const double rho = options.target_reward;
  require(rho > 0.0 && rho < 1.0, "InvalidCalibration", "target reward must lie in (0, 1)");
  for (double l : expert_losses) {
    require(l >= 0.0 && std::isfinite(l), "NegativeLoss", "expert losses must be finite and >= 0");
  }
  const double pivot = nearest_rank_quantile(expert_losses, options.quantile);
  if (pivot <= 0.0) return 1.0;
  double sigma1 = -std::log(rho) / pivot;
  // Guard the guarantee reward(pivot) >= ρ against the last ulp of exp/log.
  while (sigma1 > 0.0 && std::exp(-sigma1 * pivot) < rho) sigma1 = std::nextafter(sigma1, 0.0);
  require(sigma1 > 0.0 && std::isfinite(sigma1), "InvalidCalibration", "degenerate sigma1");
  return sigma1;
}

double red_reward(double sigma1, double loss) {
  require(loss >= 0.0, "NegativeLoss", "support loss must be >= 0");
  require(sigma1 > 0.0, "InvalidCalibration", "sigma1 must be positive");
  if (std::isinf(sigma1)) return loss == 0.0 ? 1.0 : 0.0;
  return std::exp(-sigma1 * loss);
}

double viz_reward(double alpha1, double loss) { return 1.0 - alpha1 * loss; }

void TerminalParams::validate() const {
  require(sigma2 >= 0.0, "InvalidConfig", "sigma2 must be >= 0");
  require(sigma3 >= 0.0 && sigma3 <= 1.0, "InvalidConfig", "sigma3 must lie in [0, 1]");
}

double terminal_reward(double mean_reward, const TerminalParams& params, double final_reward) {
  return final_reward < params.sigma3 * mean_reward ? -params.sigma2 * mean_reward : 0.0;
}

RewardModel::RewardModel(ScorerPtr scorer, double sigma1, double mean_expert_reward,
                         std::optional<TerminalParams> terminal)
    : scorer_(std::move(scorer)),
      sigma1_(sigma1),
      mean_expert_reward_(mean_expert_reward),
      terminal_(terminal) {
  require(scorer_ != nullptr, "InvalidConfig", "reward model needs a scorer");
  require(sigma1_ > 0.0 && !std::isnan(sigma1_), "InvalidCalibration", "sigma1 must be positive");
  require(mean_expert_reward_ >= 0.0 && mean_expert_reward_ <= 1.0, "InvalidCalibration",
          "mean expert reward must lie in [0, 1]");
  if (terminal_) terminal_->validate();
}

Vector RewardModel::reward_batch(const Matrix& inputs) const {
  const Vector scores = scorer_->score_batch(inputs);
  Vector out(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) out(i) = red_reward(sigma1_, scores(i));
  return out;
}

double RewardModel::terminal_adjustment(double final_step_reward) const {
  if (!terminal_) return 0.0;
  return terminal_reward(mean_expert_reward_, *terminal_, final_step_reward);
}

double mean_expert_reward(const SupportScorer& scorer, double sigma1, const ExpertDataset& data) {
  require(data.size() >= 1, "EmptyDataset", "expert dataset has no pairs");
  const Vector scores = scorer.score_batch(data.joint_inputs());
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) total += red_reward(sigma1, scores(i));
  return total / static_cast<double>(scores.size());
}

double mean_expert_reward(const RewardModel& model, const ExpertDataset& data) {
  return mean_expert_reward(model.scorer(), model.sigma1(), data);
}

RewardModel calibrate_reward(ScorerPtr scorer, const ExpertDataset& data,
                             const CalibrationOptions& options,
                             std::optional<TerminalParams> terminal) {
  require(scorer != nullptr, "InvalidConfig", "reward model needs a scorer");
  require(data.size() >= 1, "EmptyDataset", "expert dataset has no pairs");
  const Vector scores = scorer->score_batch(data.joint_inputs());
  const std::vector<double> losses(scores.data(), scores.data() + scores.size());
  const double sigma1 = calibrate_sigma1(losses, options);
  const double r_bar = mean_expert_reward(*scorer, sigma1, data);
  return RewardModel(std::move(scorer), sigma1, r_bar, terminal);
}

nlohmann::json reward_model_json(const RewardModel& model, const std::filesystem::path& scorer_path) {
  const TerminalParams params = model.terminal().value_or(TerminalParams{});
  return {{"scorer_path", scorer_path.generic_string()},
          {"sigma1", std::isinf(model.sigma1()) ? nlohmann::json("inf") : nlohmann::json(model.sigma1())},
          {"mean_expert_reward", model.mean_expert_reward()},
          {"sigma2", params.sigma2},
          {"sigma3", params.sigma3},
          {"terminal_enabled", model.terminal().has_value()},
          {"format_version", 1}};
}

RewardModel reward_model_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    require(j.value("format_version", 0) == 1, "UnsupportedFormat", "reward format_version must be 1");
    std::filesystem::path scorer_path = j.at("scorer_path").get<std::string>();
    if (scorer_path.is_relative()) scorer_path = base_dir / scorer_path;
    std::ifstream in(scorer_path);
    if (!in) fail("ModelNotFound", "scorer model " + scorer_path.string() + " not found");
    auto scorer = scorer_from_json(nlohmann::json::parse(in));
    std::optional<TerminalParams> terminal;
    if (j.at("terminal_enabled").get<bool>()) {
      terminal = TerminalParams{j.at("sigma2").get<double>(), j.at("sigma3").get<double>()};
    }
    const auto& s1 = j.at("sigma1");
    const double sigma1 = s1.is_string() && s1.get<std::string>() == "inf"
                              ? std::numeric_limits<double>::infinity()
                              : s1.get<double>();
    return RewardModel(std::move(scorer), sigma1,
                       j.at("mean_expert_reward").get<double>(), terminal);
  } catch (const nlohmann::json::exception& e) {
    fail("InvalidModel", std::string("malformed reward model JSON: ") + e.what());
  }
}

}  // namespace red
