#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "red/envs.hpp"
#include "red/error.hpp"

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

TEST(SimpleDomain, TrueReward) {
  EXPECT_EQ(simple_reward(0.5, -1.0), -0.5);
  EXPECT_EQ(simple_reward(0.0, 1.0), 0.0);
  EXPECT_EQ(simple_reward(0.0, -1.0), 0.0);
  EXPECT_EQ(simple_reward(0.7, 1.0), 0.7);
  EXPECT_EQ(kind_of([] { simple_reward(0.5, 0.5); }), "InvalidAction");
}

TEST(SimpleDomain, Expert) {
  EXPECT_EQ(simple_expert(0.7), 1.0);
  EXPECT_EQ(simple_expert(-0.3), -1.0);
  EXPECT_EQ(simple_expert(0.0), 1.0);
}

TEST(SimpleDomain, ActionIndexMapping) {
  EXPECT_EQ(simple_action_value(0), -1.0);
  EXPECT_EQ(simple_action_value(1), 1.0);
  EXPECT_EQ(simple_action_index(-1.0), 0);
  EXPECT_EQ(simple_action_index(1.0), 1);
  EXPECT_EQ(kind_of([] { simple_action_value(2); }), "InvalidAction");
}

TEST(SimpleDomain, StepsAreStatelessAndTruncateAt100) {
  SimpleDomain env;
  Rng rng(3);
  Vector s = env.reset(rng);
  for (int t = 1; t <= 100; ++t) {
    const double before = s(0);
    const StepResult r = env.step(1, rng);
    EXPECT_EQ(r.true_reward, before);
    EXPECT_FALSE(r.terminated);
    EXPECT_EQ(r.truncated, t == 100);
    EXPECT_GE(r.next_state(0), -1.0);
    EXPECT_LE(r.next_state(0), 1.0);
    s = r.next_state;
  }
  EXPECT_EQ(kind_of([&] { env.step(5, rng); }), "InvalidAction");
}

TEST(SimpleDomain, NextStateIndependentOfAction) {
  SimpleDomain a;
  SimpleDomain b;
  Rng ra(9);
  Rng rb(9);
  a.reset(ra);
  b.reset(rb);
  for (int t = 0; t < 20; ++t) {
    EXPECT_EQ(a.step(0, ra).next_state(0), b.step(1, rb).next_state(0));
  }
}

TEST(SimpleDomain, ExpertValueIsHalf) {
  SimpleDomain env;
  Rng rng(11);
  Vector s = env.reset(rng);
  double total = 0.0;
  const int steps = 100000;
  for (int t = 0; t < steps; ++t) {
    const StepResult r = env.step(simple_action_index(simple_expert(s(0))), rng);
    total += r.true_reward;
    s = r.truncated ? env.reset(rng) : r.next_state;
  }
  const double mean = total / steps;
  EXPECT_GE(mean, 0.49);
  EXPECT_LE(mean, 0.51);
}

TEST(Grid, StepExamples) {
  const auto right = static_cast<int>(GridAction::right);
  EXPECT_EQ(grid_step({0, 0}, right).first, (GridPos{1, 0}));
  EXPECT_EQ(grid_step({7, 0}, right).first, (GridPos{7, 0}));
  EXPECT_EQ(grid_step({0, 0}, static_cast<int>(GridAction::down)).first, (GridPos{0, 0}));
  EXPECT_EQ(grid_step({0, 0}, static_cast<int>(GridAction::left)).first, (GridPos{0, 0}));
  EXPECT_EQ(grid_step({0, 7}, static_cast<int>(GridAction::up)).first, (GridPos{0, 7}));
  EXPECT_TRUE(grid_step({7, 6}, static_cast<int>(GridAction::up)).second);
  EXPECT_EQ(kind_of([] { grid_step({0, 0}, 4); }), "InvalidAction");
}

TEST(Grid, Expert) {
  EXPECT_EQ(grid_expert({3, 0}), static_cast<int>(GridAction::right));
  EXPECT_EQ(grid_expert({7, 4}), static_cast<int>(GridAction::up));
}

TEST(Grid, ExpertReachesGoalInFourteenSteps) {
  GridWorld env;
  Rng rng(0);
  Vector s = env.reset(rng);
  int steps = 0;
  double total = 0.0;
  for (;;) {
    const StepResult r = env.step(grid_expert(grid_pos(s)), rng);
    ++steps;
    total += r.true_reward;
    s = r.next_state;
    if (r.terminated || r.truncated) {
      EXPECT_TRUE(r.terminated);
      break;
    }
  }
  EXPECT_EQ(steps, 14);
  EXPECT_EQ(total, 1.0);
}

TEST(Grid, TruncatesAtStepCap) {
  GridWorld env;
  Rng rng(0);
  env.reset(rng);
  StepResult r;
  for (int t = 1; t <= kGridMaxSteps; ++t) {
    r = env.step(static_cast<int>(GridAction::left), rng);
    EXPECT_EQ(r.truncated, t == kGridMaxSteps);
    EXPECT_FALSE(r.terminated);
  }
}

TEST(Grid, StateConversions) {
  EXPECT_EQ(grid_pos(grid_state({3, 5})), (GridPos{3, 5}));
  Vector bad(2);
  bad << 0.5, 1.0;
  EXPECT_EQ(kind_of([&] { grid_pos(bad); }), "NonDiscreteInput");
  bad << 9.0, 1.0;
  EXPECT_EQ(kind_of([&] { grid_pos(bad); }), "InvalidState");
}

TEST(ExpertDataset, SimpleDomain) {
  const ExpertDataset d = generate_expert_dataset(EnvKind::simple, 5, 42);
  ASSERT_EQ(d.size(), 5);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    EXPECT_EQ(simple_action_value(d.action_index(i)), simple_expert(d.states(0, i)));
    EXPECT_GE(d.states(0, i), -1.0);
    EXPECT_LE(d.states(0, i), 1.0);
  }
  const ExpertDataset again = generate_expert_dataset(EnvKind::simple, 5, 42);
  EXPECT_EQ(again.states, d.states);
  EXPECT_EQ(again.actions, d.actions);
  EXPECT_NE(generate_expert_dataset(EnvKind::simple, 5, 43).states, d.states);
}

TEST(ExpertDataset, GridIsFourteenPairs) {
  const ExpertDataset d = generate_expert_dataset(EnvKind::grid, 1, 0);
  ASSERT_EQ(d.size(), 14);
  int rights = 0;
  int ups = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    rights += d.action_index(i) == static_cast<int>(GridAction::right) ? 1 : 0;
    ups += d.action_index(i) == static_cast<int>(GridAction::up) ? 1 : 0;
    EXPECT_EQ(d.action_index(i), grid_expert(grid_pos(d.states.col(i))));
  }
  EXPECT_EQ(rights, 7);
  EXPECT_EQ(ups, 7);
  EXPECT_EQ(generate_expert_dataset(EnvKind::grid, 3, 0).size(), 42);
}

TEST(ExpertDataset, InvalidCount) {
  EXPECT_EQ(kind_of([] { generate_expert_dataset(EnvKind::simple, 0, 1); }), "InvalidCount");
}

TEST(EnvKind, NamesRoundTrip) {
  EXPECT_EQ(env_kind_from_string(to_string(EnvKind::simple)), EnvKind::simple);
  EXPECT_EQ(env_kind_from_string(to_string(EnvKind::grid)), EnvKind::grid);
  EXPECT_THROW(env_kind_from_string("mujoco"), Error);
  EXPECT_EQ(make_environment(EnvKind::grid)->num_actions(), 4);
}

}  // namespace
}  // namespace red
