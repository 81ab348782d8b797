#pragma once

// Reinforcement learning against a fixed imitation reward, plus a behavioral
// cloning baseline. Agents never observe the environment's true reward during
// training; it is only used by evaluate_policy.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "red/envs.hpp"
#include "red/nn.hpp"
#include "red/reward.hpp"

namespace red {

using Policy = std::function<int(const Vector& state)>;

struct EvalResult {
  double mean_episodic = 0.0;  // mean true return per episode
  double mean_per_step = 0.0;  // total true reward / total steps
  double std_per_step = 0.0;   // std over episodes of each episode's per-step mean
};

/// Greedy rollouts under the environment's true reward.
EvalResult evaluate_policy(const Environment& env, const Policy& policy, int n_episodes,
                           std::uint64_t seed);

struct CurveRow {
  std::int64_t env_step = 0;
  double true_reward_per_step = 0.0;
  double true_reward_per_episode = 0.0;
  double eval_std = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kCurveCsvHeader =
    "env_step,true_reward_per_step,true_reward_per_episode,eval_std,seed";

std::string curve_csv(const std::vector<CurveRow>& rows);

// ---------------------------------------------------------------------------
// Deep Q-learning

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  std::int64_t decay_steps = 5000;

  /// Linear decay from start to end, flat afterwards.
  double at(std::int64_t step) const;
};

struct DqnConfig {
  // ReLU: a zero-bias tanh net is odd in s, so under an uninformative reward
  // the greedy policy locks into ±sign(s) instead of staying near chance.
  MlpSpec q_net{1, {64, 64}, 2, Activation::relu, 1.0};
  double gamma = 0.99;
  EpsilonSchedule epsilon;
  std::size_t replay_capacity = 10000;
  std::size_t batch_size = 32;
  std::int64_t target_sync = 250;
  std::int64_t total_steps = 20000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::int64_t eval_interval = 1000;
  int eval_episodes = 10;

  void validate() const;
};

struct Transition {
  Vector state;
  int action = 0;
  double reward = 0.0;  // imitation reward, never the true reward
  Vector next_state;
  bool done = false;    // absorbing next state (no bootstrap)
};

/// Fixed-capacity FIFO ring buffer with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  /// Indices drawn uniformly with replacement from [0, size()).
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

int greedy_action(const MlpParams& q_net, const Vector& state);
Policy greedy_policy(MlpParams q_net);

/// y_b = r_b + γ·(1 - done_b)·max_a' Q_target(s'_b, a')
Vector td_targets(const MlpParams& target_net, const std::vector<const Transition*>& batch,
                  double gamma);

struct DqnResult {
  MlpParams q_net;
  std::vector<CurveRow> curve;
};

class DqnTrainer {
 public:
  DqnTrainer(const Environment& env, const RewardModel& reward, DqnConfig config);

  /// Runs all configured environment steps.
  void run();

  const ReplayBuffer& replay() const { return replay_; }
  const MlpParams& q_net() const { return q_net_; }
  const std::vector<CurveRow>& curve() const { return curve_; }
  DqnResult result() const { return {q_net_, curve_}; }

 private:
  void learn(Rng& rng);
  void record_eval(std::int64_t env_step);

  std::unique_ptr<Environment> env_;
  std::unique_ptr<Environment> eval_env_;
  const RewardModel& reward_;
  DqnConfig config_;
  MlpParams q_net_;
  MlpParams target_net_;
  AdamState adam_;
  ReplayBuffer replay_;
  std::vector<CurveRow> curve_;
};

DqnResult dqn_train(const Environment& env, const RewardModel& reward, const DqnConfig& config);

// ---------------------------------------------------------------------------
// Tabular Q-learning on the gridworld

struct TabularConfig {
  double alpha = 0.5;
  double gamma = 0.99;
  double epsilon = 0.2;
  std::int64_t total_steps = 50000;
  std::uint64_t seed = 0;
  std::int64_t eval_interval = 5000;
  // Reaching a terminal state enters an absorbing state worth r̄ per step
  // (value r̄ / (1 - γ)) instead of 0. The expert's trajectory ends there, so
  // termination belongs to its support; without this, any positive reward
  // for revisiting expert pairs makes the agent avoid the goal.
  bool absorbing_terminal = true;

  void validate() const;
};

struct TabularQ {
  Matrix q = Matrix::Zero(kGridWidth * kGridHeight, 4);  // row = y * width + x

  static int index(GridPos p) { return p.y * kGridWidth + p.x; }
  double& at(GridPos p, int a) { return q(index(p), a); }
  double at(GridPos p, int a) const { return q(index(p), a); }
  int greedy(GridPos p) const;
  Policy policy() const;
};

struct TabularResult {
  TabularQ table;
  std::vector<CurveRow> curve;
};

TabularResult tabular_q_train(const GridWorld& env, const RewardModel& reward,
                              const TabularConfig& config);

// ---------------------------------------------------------------------------
// Behavioral cloning (softmax classifier on states)

MlpSpec default_bc_spec(int state_dim, int num_actions);  // state -> 64 -> 64 -> actions, tanh

MlpParams behavioral_cloning(const ExpertDataset& data, const MlpSpec& spec, int steps,
                             std::uint64_t seed, const AdamConfig& adam = {});

Policy bc_policy(MlpParams net);

}  // namespace red
