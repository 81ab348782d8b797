#pragma once

// Built-in environments: the stateless sign task and an 8x8 gridworld.
// Environments hold only their episode state; randomness comes from the
// caller's generator so training and evaluation can use separate streams.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>

#include "red/dataset.hpp"
#include "red/nn.hpp"

namespace red {

using Rng = std::mt19937_64;

struct StepResult {
  Vector next_state;
  double true_reward = 0.0;
  bool terminated = false;  // reached an absorbing state
  bool truncated = false;   // hit the step cap
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual int state_dim() const = 0;
  virtual int num_actions() const = 0;
  virtual int max_steps() const = 0;
  virtual Vector reset(Rng& rng) = 0;
  virtual StepResult step(int action, Rng& rng) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;

  Vector action_encoding(int action) const { return one_hot(action, num_actions()); }
  Vector joint(const Vector& state, int action) const {
    return joint_input(state, action_encoding(action));
  }
};

// ---------------------------------------------------------------------------
// Stateless task: s ~ unif(-1, 1) every step, a ∈ {-1, +1}, true reward a·s.
// Action index 0 is a = -1, index 1 is a = +1.

inline constexpr int kSimpleEpisodeLength = 100;

/// True reward a·s; throws InvalidAction unless a ∈ {-1, +1}.
double simple_reward(double s, double a);
/// sign(s) with sign(0) = +1.
double simple_expert(double s);

double simple_action_value(int action_index);
int simple_action_index(double a);

class SimpleDomain final : public Environment {
 public:
  explicit SimpleDomain(int episode_length = kSimpleEpisodeLength);

  int state_dim() const override { return 1; }
  int num_actions() const override { return 2; }
  int max_steps() const override { return episode_length_; }
  Vector reset(Rng& rng) override;
  StepResult step(int action, Rng& rng) override;
  std::unique_ptr<Environment> clone() const override;

  double state() const { return s_; }
  int step_index() const { return step_index_; }

 private:
  int episode_length_;
  double s_ = 0.0;
  int step_index_ = 0;
};

// ---------------------------------------------------------------------------
// Deterministic 8x8 grid, start (0,0), goal (7,7), 64-step cap.

enum class GridAction : int { up = 0, down = 1, left = 2, right = 3 };

struct GridPos {
  int x = 0;
  int y = 0;
  bool operator==(const GridPos&) const = default;
};

inline constexpr int kGridWidth = 8;
inline constexpr int kGridHeight = 8;
inline constexpr int kGridMaxSteps = 64;
inline constexpr GridPos kGridStart{0, 0};
inline constexpr GridPos kGridGoal{7, 7};

/// Wall-clipped move; returns the new position and whether it is the goal.
std::pair<GridPos, bool> grid_step(GridPos pos, int action);
/// Right along the bottom row, then up the last column.
int grid_expert(GridPos pos);

Vector grid_state(GridPos pos);
GridPos grid_pos(const Vector& state);

class GridWorld final : public Environment {
 public:
  int state_dim() const override { return 2; }
  int num_actions() const override { return 4; }
  int max_steps() const override { return kGridMaxSteps; }
  Vector reset(Rng& rng) override;
  /// True reward: 1 on reaching the goal, 0 otherwise.
  StepResult step(int action, Rng& rng) override;
  std::unique_ptr<Environment> clone() const override;

  GridPos position() const { return pos_; }

 private:
  GridPos pos_ = kGridStart;
  int steps_ = 0;
};

// ---------------------------------------------------------------------------

enum class EnvKind { simple, grid };

const char* to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& name);
std::unique_ptr<Environment> make_environment(EnvKind kind);

/// Simple domain: `count` i.i.d. states labelled by the expert.
/// Gridworld: the expert trajectory from the start, repeated `count` times
/// (the environment is deterministic, so each repeat is identical).
ExpertDataset generate_expert_dataset(EnvKind kind, int count, std::uint64_t seed);

}  // namespace red
