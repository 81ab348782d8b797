#pragma once

// End-to-end pipeline: fit a support scorer on expert data, calibrate the
// reward, train an agent against it, and write CSV/JSON/SVG artifacts.
//
// Component seeds are derived from the master seed as
//   seed(component) = master XOR fnv1a64(component)
// with components "dataset", "estimator", "rl" and "bc".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "red/envs.hpp"
#include "red/estimators.hpp"
#include "red/kernel_support.hpp"
#include "red/reward.hpp"
#include "red/rl.hpp"

namespace red {

enum class EstimatorKind { kernel, rnd, ae, exact };

const char* to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::rnd;
  int steps = kDefaultEstimatorSteps;
  double lr = 1e-3;  // rnd predictor
  // rnd
  std::vector<int> target_hidden{64, 64};
  std::vector<int> predictor_hidden{128, 128};
  int embedding_dim = 32;
  double target_init_scale = kDefaultRndTargetInitScale;
  // ae
  std::vector<int> ae_hidden{128, 128};
  double ae_weight_decay = kDefaultAeWeightDecay;
  double ae_lr = kDefaultAeLearningRate;
  // kernel
  std::optional<double> kernel_bandwidth;  // nullopt: median heuristic
  KernelExponent kernel_exponent = KernelExponent::euclidean_norm;
  std::optional<int> kernel_m;             // nullopt: 99.9% trace rule
  std::optional<double> kernel_ridge;      // nullopt: 1e-10 * λ_max
};

struct RewardConfig {
  double rho = 0.9;
  double quantile = 0.9;
  bool terminal = false;
  double sigma2 = 1.0;
  double sigma3 = 0.5;
  double viz_alpha = 1.0;
  // Fixed σ₁ instead of calibration; +inf gives the 0/1 indicator reward.
  // Unset means calibrate, except for the exact estimator, which defaults to
  // the indicator.
  std::optional<double> sigma1;
};

struct DatasetConfig {
  std::optional<std::filesystem::path> path;  // load from CSV, else generate
  int n = 10;                                 // pairs (simple) or trajectories (grid)
};

struct GridSpec {
  int points = 201;
  double lo = -1.0;
  double hi = 1.0;
  bool expert_pairs_only = false;  // score the fitted dataset's own pairs instead
};

struct RunConfig {
  EstimatorConfig estimator;
  RewardConfig reward;
  EnvKind env = EnvKind::simple;
  DatasetConfig dataset;
  DqnConfig dqn;
  TabularConfig tabular;
  GridSpec score_grid;
  std::filesystem::path out_dir = "red_out";
  std::uint64_t seed = 0;
};

/// Parses a single JSON document; unknown keys raise InvalidConfig.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
/// Full snapshot; parse_run_config(run_config_json(c)) reproduces c.
nlohmann::json run_config_json(const RunConfig& config);

struct SweepConfig {
  RunConfig base;
  std::vector<EstimatorKind> estimators;
  std::vector<int> sizes;
  int seeds = 5;
};

SweepConfig parse_sweep_config(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Library-level pipeline steps (used by the CLI and directly by tests)

ExpertDataset resolve_dataset(const RunConfig& config);
ScorerPtr fit_scorer(const RunConfig& config, const ExpertDataset& data);
/// Calibrated reward, or a fixed σ₁ when configured (the exact estimator defaults to +inf).
RewardModel build_reward_model(const RunConfig& config, ScorerPtr scorer, const ExpertDataset& data);

struct LossStats {
  std::vector<double> losses;
  double q50 = 0.0;
  double q90 = 0.0;
  double max = 0.0;
};

LossStats loss_stats(const SupportScorer& scorer, const ExpertDataset& data);
nlohmann::json to_json(const LossStats& stats);

struct RewardMapRow {
  double s;
  double a;
  double score;
  double reward;
  double viz_reward;
};

inline constexpr const char* kRewardMapCsvHeader = "s,a,score,reward,viz_reward";

/// Simple-domain grid of states crossed with a ∈ {-1, +1}.
std::vector<RewardMapRow> reward_map(const RewardModel& model, const GridSpec& grid, double viz_alpha);
std::string reward_map_csv(const std::vector<RewardMapRow>& rows);

struct TrainOutcome {
  std::vector<CurveRow> curve;
  double sigma1 = 0.0;
  double mean_expert_reward = 0.0;
  std::string scorer_descriptor;
  /// Grid only: fraction of expert-visited states where the greedy action matches.
  std::optional<double> expert_agreement;
};

// ---------------------------------------------------------------------------
// Commands. Each writes into config.out_dir and returns a process exit code:
// 0 success, 2 config/input error, 3 runtime failure. Errors are written as
// {"kind": ..., "message": ...} to `err` and to <out>/error.json.

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitRuntimeError = 3;

int exit_code_for(const std::string& error_kind);

int cmd_fit(const RunConfig& config, std::ostream& err);
int cmd_score(const RunConfig& config, std::ostream& err);
int cmd_train(const RunConfig& config, std::ostream& err);
int cmd_experiment(const SweepConfig& sweep, int jobs, std::ostream& err);
/// `smooth_window` > 1 applies a trailing moving average to the plotted
/// learning curves; the summary table always reports raw final values.
int cmd_report(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err,
               int smooth_window = 1);

/// Runs fit -> calibrate -> RL -> evaluate and writes the run artifacts.
TrainOutcome run_training(const RunConfig& config);

}  // namespace red
