#include "red/envs.hpp"

#include <algorithm>
#include <vector>

#include "red/error.hpp"

namespace red {

double simple_reward(double s, double a) {
  require(a == -1.0 || a == 1.0, "InvalidAction", "simple-domain actions are -1 and +1");
  return a * s;
}

double simple_expert(double s) { return s < 0.0 ? -1.0 : 1.0; }

double simple_action_value(int action_index) {
  require(action_index == 0 || action_index == 1, "InvalidAction",
          "simple-domain action index must be 0 or 1");
  return action_index == 0 ? -1.0 : 1.0;
}

int simple_action_index(double a) {
  require(a == -1.0 || a == 1.0, "InvalidAction", "simple-domain actions are -1 and +1");
  return a < 0.0 ? 0 : 1;
}

SimpleDomain::SimpleDomain(int episode_length) : episode_length_(episode_length) {
  require(episode_length_ >= 1, "InvalidConfig", "episode length must be >= 1");
}

Vector SimpleDomain::reset(Rng& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  s_ = unif(rng);
  step_index_ = 0;
  return Vector::Constant(1, s_);
}

StepResult SimpleDomain::step(int action, Rng& rng) {
  const double reward = simple_reward(s_, simple_action_value(action));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  s_ = unif(rng);
  ++step_index_;
  return {Vector::Constant(1, s_), reward, false, step_index_ >= episode_length_};
}

std::unique_ptr<Environment> SimpleDomain::clone() const {
  return std::make_unique<SimpleDomain>(*this);
}

std::pair<GridPos, bool> grid_step(GridPos pos, int action) {
  switch (action) {
    case static_cast<int>(GridAction::up): pos.y = std::min(pos.y + 1, kGridHeight - 1); break;
    case static_cast<int>(GridAction::down): pos.y = std::max(pos.y - 1, 0); break;
    case static_cast<int>(GridAction::left): pos.x = std::max(pos.x - 1, 0); break;
    case static_cast<int>(GridAction::right): pos.x = std::min(pos.x + 1, kGridWidth - 1); break;
    default: fail("InvalidAction", "grid action must be in [0, 4)");
  }
  return {pos, pos == kGridGoal};
}

int grid_expert(GridPos pos) {
  return static_cast<int>(pos.x < kGridWidth - 1 ? GridAction::right : GridAction::up);
}

Vector grid_state(GridPos pos) {
  Vector v(2);
  v << pos.x, pos.y;
  return v;
}

GridPos grid_pos(const Vector& state) {
  require(state.size() == 2, "ShapeMismatch", "grid state is (x, y)");
  const GridPos pos{static_cast<int>(state(0)), static_cast<int>(state(1))};
  require(state(0) == pos.x && state(1) == pos.y, "NonDiscreteInput", "grid state must be integral");
  require(pos.x >= 0 && pos.x < kGridWidth && pos.y >= 0 && pos.y < kGridHeight, "InvalidState",
          "grid state out of bounds");
  return pos;
}

Vector GridWorld::reset(Rng&) {
  pos_ = kGridStart;
  steps_ = 0;
  return grid_state(pos_);
}

StepResult GridWorld::step(int action, Rng&) {
  const auto [next, at_goal] = grid_step(pos_, action);
  pos_ = next;
  ++steps_;
  return {grid_state(pos_), at_goal ? 1.0 : 0.0, at_goal, !at_goal && steps_ >= kGridMaxSteps};
}

std::unique_ptr<Environment> GridWorld::clone() const { return std::make_unique<GridWorld>(*this); }

const char* to_string(EnvKind kind) { return kind == EnvKind::simple ? "simple" : "grid"; }

EnvKind env_kind_from_string(const std::string& name) {
  if (name == "simple") return EnvKind::simple;
  if (name == "grid") return EnvKind::grid;
  fail("InvalidConfig", "unknown environment '" + name + "'");
}

std::unique_ptr<Environment> make_environment(EnvKind kind) {
  if (kind == EnvKind::simple) return std::make_unique<SimpleDomain>();
  return std::make_unique<GridWorld>();
}

ExpertDataset generate_expert_dataset(EnvKind kind, int count, std::uint64_t seed) {
  require(count >= 1, "InvalidCount", "dataset size must be >= 1");
  ExpertDataset data;
  data.seed = seed;
  data.action_space = {ActionSpace::Kind::discrete, kind == EnvKind::simple ? 2 : 4};
  if (kind == EnvKind::simple) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    data.states.resize(1, count);
    data.actions = Matrix::Zero(2, count);
    for (int i = 0; i < count; ++i) {
      const double s = unif(rng);
      data.states(0, i) = s;
      data.actions(simple_action_index(simple_expert(s)), i) = 1.0;
    }
    data.source = "simple:expert:n=" + std::to_string(count);
    return data;
  }

  std::vector<std::pair<GridPos, int>> path;
  for (int t = 0; t < count; ++t) {
    GridPos pos = kGridStart;
    for (int step = 0; step < kGridMaxSteps; ++step) {
      const int a = grid_expert(pos);
      path.emplace_back(pos, a);
      const auto [next, done] = grid_step(pos, a);
      pos = next;
      if (done) break;
    }
  }
  const auto n = static_cast<Eigen::Index>(path.size());
  data.states.resize(2, n);
  data.actions = Matrix::Zero(4, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.states.col(i) = grid_state(path[static_cast<std::size_t>(i)].first);
    data.actions(path[static_cast<std::size_t>(i)].second, i) = 1.0;
  }
  data.source = "grid:expert:trajectories=" + std::to_string(count);
  return data;
}

}  // namespace red
