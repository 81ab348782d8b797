#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>

#include <gtest/gtest.h>

#include "red/envs.hpp"
#include "red/error.hpp"
#include "red/reward.hpp"

namespace red {
namespace {

std::string kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return "none";
}

// Scores each input by its first coordinate, so tests can dial in exact losses.
class FirstCoordScorer final : public SupportScorer {
 public:
  double score(const Vector& x) const override { return x(0); }
  int input_dim() const override { return 3; }
  std::string descriptor() const override { return "first-coordinate"; }
  nlohmann::json to_json() const override { return {}; }
};

ExpertDataset dataset_with_states(std::initializer_list<double> states) {
  ExpertDataset d;
  d.states.resize(1, static_cast<Eigen::Index>(states.size()));
  d.actions = Matrix::Zero(2, d.states.cols());
  Eigen::Index i = 0;
  for (double s : states) {
    d.states(0, i) = s;
    d.actions(1, i++) = 1.0;
  }
  return d;
}

TEST(Quantile, NearestRank) {
  const std::vector<double> v = {5, 1, 4, 2, 3};
  EXPECT_EQ(nearest_rank_quantile(v, 0.5), 3.0);
  EXPECT_EQ(nearest_rank_quantile(v, 0.9), 5.0);
  EXPECT_EQ(nearest_rank_quantile(v, 0.2), 1.0);
  EXPECT_EQ(nearest_rank_quantile(v, 1.0), 5.0);
}

TEST(CalibrateSigma1, AllEqualLosses) {
  const std::vector<double> ones(10, 1.0);
  EXPECT_NEAR(calibrate_sigma1(ones), -std::log(0.9), 1e-15);
  EXPECT_NEAR(calibrate_sigma1(ones), 0.10536051565782628, 1e-12);
}

TEST(CalibrateSigma1, ZeroLossesFallBackToOne) {
  const std::vector<double> zeros(7, 0.0);
  EXPECT_EQ(calibrate_sigma1(zeros), 1.0);
  EXPECT_EQ(calibrate_sigma1(zeros, CalibrationOptions{0.5, 0.3}), 1.0);
}

TEST(CalibrateSigma1, QuantilePairGetsAtLeastRho) {
  std::vector<double> losses;
  for (int i = 1; i <= 37; ++i) losses.push_back(0.013 * i * i);
  const double s1 = calibrate_sigma1(losses);
  int above = 0;
  for (double l : losses) above += red_reward(s1, l) >= 0.9 ? 1 : 0;
  EXPECT_GE(above, static_cast<int>(std::ceil(0.9 * 37)));
}

TEST(CalibrateSigma1, Errors) {
  EXPECT_EQ(kind_of([] { calibrate_sigma1(std::vector<double>{}); }), "EmptyLosses");
  EXPECT_EQ(kind_of([] { calibrate_sigma1(std::vector<double>{1.0}, CalibrationOptions{1.0, 0.9}); }),
            "InvalidCalibration");
  EXPECT_EQ(kind_of([] { calibrate_sigma1(std::vector<double>{1.0}, CalibrationOptions{0.9, 0.0}); }),
            "InvalidQuantile");
  EXPECT_EQ(kind_of([] { calibrate_sigma1(std::vector<double>{-1.0}); }), "NegativeLoss");
}

TEST(RedReward, Examples) {
  EXPECT_EQ(red_reward(3.0, 0.0), 1.0);
  EXPECT_NEAR(red_reward(1.0, std::log(2.0)), 0.5, 1e-15);
  EXPECT_LT(red_reward(1.0, 1000.0), 1e-300);
  EXPECT_EQ(kind_of([] { red_reward(1.0, -0.1); }), "NegativeLoss");
}

TEST(RedReward, MonotoneAndOrderInvariantInSigma) {
  const std::vector<double> losses = {0.0, 0.01, 0.3, 2.0, 50.0};
  for (double s1 : {0.01, 1.0, 500.0}) {
    for (std::size_t i = 1; i < losses.size(); ++i) {
      EXPECT_GE(red_reward(s1, losses[i - 1]), red_reward(s1, losses[i]));
      if (s1 < 100.0) EXPECT_GT(red_reward(s1, losses[i - 1]), red_reward(s1, losses[i]));
      EXPECT_GE(red_reward(s1, losses[i]), 0.0);
      EXPECT_LE(red_reward(s1, losses[i]), 1.0);
    }
  }
}

TEST(VizReward, Examples) {
  EXPECT_EQ(viz_reward(1.0, 0.0), 1.0);
  EXPECT_EQ(viz_reward(1.0, 1.0), 0.0);
  EXPECT_EQ(viz_reward(2.0, 1.0), -1.0);
}

TEST(TerminalReward, Examples) {
  EXPECT_EQ(terminal_reward(0.95, TerminalParams{1.0, 0.5}, 0.2), -0.95);
  EXPECT_EQ(terminal_reward(0.95, TerminalParams{1.0, 0.5}, 0.9), 0.0);
  for (double rt : {0.0, 0.3, 1.0}) EXPECT_EQ(terminal_reward(0.95, TerminalParams{0.0, 0.5}, rt), 0.0);
}

TEST(TerminalReward, RangeAndValidation) {
  for (double rbar : {0.0, 0.4, 1.0}) {
    for (double rt : {0.0, 0.1, 0.5, 1.0}) {
      const double t = terminal_reward(rbar, TerminalParams{2.0, 0.7}, rt);
      EXPECT_LE(t, 0.0);
      EXPECT_GE(t, -2.0);
    }
  }
  EXPECT_THROW(TerminalParams({-1.0, 0.5}).validate(), Error);
  EXPECT_THROW(TerminalParams({1.0, 1.5}).validate(), Error);
}

TEST(MeanExpertReward, Examples) {
  const auto scorer = std::make_shared<FirstCoordScorer>();
  // Scores equal the states; with sigma1 = 1 rewards are exp(-s).
  const ExpertDataset zeros = dataset_with_states({0.0, 0.0, 0.0});
  EXPECT_EQ(mean_expert_reward(*scorer, 1.0, zeros), 1.0);
  const ExpertDataset two = dataset_with_states({0.0, -std::log(0.8)});
  EXPECT_NEAR(mean_expert_reward(*scorer, 1.0, two), 0.9, 1e-15);
  ExpertDataset empty = dataset_with_states({0.0});
  empty.states.resize(1, 0);
  empty.actions.resize(2, 0);
  EXPECT_EQ(kind_of([&] { mean_expert_reward(*scorer, 1.0, empty); }), "EmptyDataset");
}

TEST(RewardModel, CalibrateAndTerminal) {
  const auto scorer = std::make_shared<FirstCoordScorer>();
  const ExpertDataset data = dataset_with_states({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
  const RewardModel model = calibrate_reward(scorer, data, {}, TerminalParams{1.0, 0.5});
  EXPECT_NEAR(model.sigma1(), -std::log(0.9) / 0.9, 1e-12);
  const Vector r = model.reward_batch(data.joint_inputs());
  EXPECT_GE((r.array() >= 0.9).count(), 9);
  EXPECT_NEAR(model.mean_expert_reward(), r.mean(), 1e-15);
  EXPECT_EQ(model.terminal_adjustment(0.0), -model.mean_expert_reward());
  EXPECT_EQ(model.terminal_adjustment(1.0), 0.0);
  const RewardModel plain(scorer, 1.0, 0.9);
  EXPECT_EQ(plain.terminal_adjustment(0.0), 0.0);
}

TEST(RewardModel, RejectsNonPositiveSigma) {
  EXPECT_THROW(RewardModel(std::make_shared<FirstCoordScorer>(), 0.0, 0.9), Error);
}

TEST(RewardModel, JsonRoundTripThroughScorerFile) {
  const auto dir = std::filesystem::temp_directory_path() / "red_reward_json_test";
  std::filesystem::create_directories(dir);
  const auto scorer = std::make_shared<ConstantScorer>(3, 0.25);
  std::ofstream(dir / "scorer.json") << scorer->to_json().dump();
  const RewardModel model(scorer, 2.0, 0.6, TerminalParams{0.5, 0.25});
  const nlohmann::json j = reward_model_json(model, "scorer.json");
  const RewardModel back = reward_model_from_json(nlohmann::json::parse(j.dump()), dir);
  EXPECT_EQ(back.sigma1(), 2.0);
  EXPECT_EQ(back.mean_expert_reward(), 0.6);
  ASSERT_TRUE(back.terminal().has_value());
  EXPECT_EQ(back.terminal()->sigma2, 0.5);
  EXPECT_EQ(back.terminal()->sigma3, 0.25);
  EXPECT_EQ(back.reward(Vector::Zero(3)), model.reward(Vector::Zero(3)));
  EXPECT_EQ(kind_of([&] { reward_model_from_json(j, dir / "missing"); }), "ModelNotFound");
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace red
