#include "red/rl.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "red/error.hpp"
#include "red/format.hpp"
#include "red/seed.hpp"

namespace red {

namespace {

int argmax(const Vector& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

double checked_reward(const RewardModel& reward, const Vector& x) {
  const double r = reward.reward(x);
  if (!(r >= 0.0 && r <= 1.0)) {
    fail("RewardOutOfRange", "reward model emitted " + format_double(r) + " outside [0, 1]");
  }
  return r;
}

void check_reward_dims(const Environment& env, const RewardModel& reward) {
  const int expected = env.state_dim() + env.num_actions();
  require(reward.input_dim() == expected, "ShapeMismatch",
          "reward model expects input dim " + std::to_string(reward.input_dim()) +
              " but the environment encodes state-action pairs with " + std::to_string(expected));
}

}  // namespace

EvalResult evaluate_policy(const Environment& env, const Policy& policy, int n_episodes,
                           std::uint64_t seed) {
  require(n_episodes >= 1, "InvalidConfig", "need at least one evaluation episode");
  auto rollout_env = env.clone();
  Rng rng(seed);
  double total_reward = 0.0;
  std::int64_t total_steps = 0;
  std::vector<double> per_step_means;
  per_step_means.reserve(static_cast<std::size_t>(n_episodes));
  for (int ep = 0; ep < n_episodes; ++ep) {
    Vector state = rollout_env->reset(rng);
    double episode_return = 0.0;
    int steps = 0;
    while (true) {
      const StepResult r = rollout_env->step(policy(state), rng);
      episode_return += r.true_reward;
      ++steps;
      state = r.next_state;
      if (r.terminated || r.truncated) break;
    }
    total_reward += episode_return;
    total_steps += steps;
    per_step_means.push_back(episode_return / steps);
  }
  EvalResult out;
  out.mean_episodic = total_reward / n_episodes;
  out.mean_per_step = total_reward / static_cast<double>(total_steps);
  double mean = 0.0;
  for (double v : per_step_means) mean += v;
  mean /= n_episodes;
  double var = 0.0;
  for (double v : per_step_means) var += (v - mean) * (v - mean);
  out.std_per_step = std::sqrt(var / n_episodes);
  return out;
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::ostringstream out;
  out << kCurveCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.env_step << ',' << format_double(r.true_reward_per_step) << ','
        << format_double(r.true_reward_per_episode) << ',' << format_double(r.eval_std) << ','
        << r.seed << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

double EpsilonSchedule::at(std::int64_t step) const {
  if (decay_steps <= 0 || step >= decay_steps) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
  return start + frac * (end - start);
}

void DqnConfig::validate() const {
  q_net.validate();
  require(gamma >= 0.0 && gamma < 1.0, "InvalidDiscount", "gamma must lie in [0, 1)");
  require(epsilon.start >= 0.0 && epsilon.start <= 1.0 && epsilon.end >= 0.0 && epsilon.end <= 1.0,
          "InvalidConfig", "epsilon values must lie in [0, 1]");
  require(batch_size >= 1 && replay_capacity >= batch_size, "InvalidConfig",
          "replay capacity must be >= batch size >= 1");
  require(target_sync >= 1 && total_steps >= 0 && eval_interval >= 1 && eval_episodes >= 1,
          "InvalidConfig", "DQN counts must be positive");
  require(lr > 0.0, "InvalidConfig", "learning rate must be positive");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity_ >= 1, "InvalidConfig", "replay capacity must be >= 1");
  items_.reserve(capacity_);
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  require(!items_.empty(), "EmptyReplay", "cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

int greedy_action(const MlpParams& q_net, const Vector& state) {
  return argmax(mlp_forward(q_net, state));
}

Policy greedy_policy(MlpParams q_net) {
  return [net = std::move(q_net)](const Vector& s) { return greedy_action(net, s); };
}

Vector td_targets(const MlpParams& target_net, const std::vector<const Transition*>& batch,
                  double gamma) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  Matrix next(target_net.input_dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) next.col(i) = batch[static_cast<std::size_t>(i)]->next_state;
  const Matrix q_next = mlp_forward_batch(target_net, next);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = *batch[static_cast<std::size_t>(i)];
    y(i) = t.reward;
    if (!t.done && gamma != 0.0) y(i) += gamma * q_next.col(i).maxCoeff();
  }
  return y;
}

DqnTrainer::DqnTrainer(const Environment& env, const RewardModel& reward, DqnConfig config)
    : env_(env.clone()),
      eval_env_(env.clone()),
      reward_(reward),
      config_(std::move(config)),
      q_net_(),
      target_net_(),
      adam_(),
      replay_(std::max<std::size_t>(config_.replay_capacity, 1)) {
  config_.validate();
  require(config_.q_net.input_dim == env.state_dim() && config_.q_net.output_dim == env.num_actions(),
          "ShapeMismatch", "q-network must map states to one value per action");
  check_reward_dims(env, reward);
  q_net_ = mlp_init(config_.q_net, derive_seed(config_.seed, "dqn.qnet"));
  target_net_ = q_net_;
  adam_ = AdamState::fresh(q_net_, AdamConfig{config_.lr});
}

void DqnTrainer::learn(Rng& rng) {
  const auto idx = replay_.sample_indices(config_.batch_size, rng);
  std::vector<const Transition*> batch;
  batch.reserve(idx.size());
  for (auto i : idx) batch.push_back(&replay_[i]);

  const Vector y = td_targets(target_net_, batch, config_.gamma);
  const auto n = static_cast<Eigen::Index>(batch.size());
  Matrix states(q_net_.input_dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) states.col(i) = batch[static_cast<std::size_t>(i)]->state;

  ForwardCache cache;
  const Matrix q = mlp_forward_cached(q_net_, states, cache);
  Matrix out_grad = Matrix::Zero(q.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = batch[static_cast<std::size_t>(i)]->action;
    out_grad(a, i) = 2.0 * (q(a, i) - y(i)) / static_cast<double>(n);
  }
  adam_update(adam_, q_net_, mlp_backward(q_net_, cache, out_grad));
}

void DqnTrainer::record_eval(std::int64_t env_step) {
  const EvalResult e = evaluate_policy(*eval_env_, greedy_policy(q_net_), config_.eval_episodes,
                                       derive_seed(config_.seed, "dqn.eval"));
  curve_.push_back({env_step, e.mean_per_step, e.mean_episodic, e.std_per_step, config_.seed});
}

void DqnTrainer::run() {
  Rng rng(derive_seed(config_.seed, "dqn.train"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> random_action(0, env_->num_actions() - 1);

  Vector state = env_->reset(rng);
  for (std::int64_t step = 0; step < config_.total_steps; ++step) {
    const int action = unit(rng) < config_.epsilon.at(step) ? random_action(rng)
                                                             : greedy_action(q_net_, state);
    double r = checked_reward(reward_, env_->joint(state, action));
    StepResult res = env_->step(action, rng);
    const bool episode_over = res.terminated || res.truncated;
    if (episode_over) r += reward_.terminal_adjustment(r);
    replay_.push({state, action, r, res.next_state, res.terminated});
    state = episode_over ? env_->reset(rng) : std::move(res.next_state);

    if (replay_.size() >= config_.batch_size) learn(rng);
    if ((step + 1) % config_.target_sync == 0) target_net_ = q_net_;
    if ((step + 1) % config_.eval_interval == 0 || step + 1 == config_.total_steps) {
      record_eval(step + 1);
    }
  }
}

DqnResult dqn_train(const Environment& env, const RewardModel& reward, const DqnConfig& config) {
  DqnTrainer trainer(env, reward, config);
  trainer.run();
  return trainer.result();
}

// ---------------------------------------------------------------------------

void TabularConfig::validate() const {
  require(gamma >= 0.0 && gamma < 1.0, "InvalidDiscount", "gamma must lie in [0, 1)");
  require(alpha > 0.0 && alpha <= 1.0, "InvalidConfig", "alpha must lie in (0, 1]");
  require(epsilon >= 0.0 && epsilon <= 1.0, "InvalidConfig", "epsilon must lie in [0, 1]");
  require(total_steps >= 0 && eval_interval >= 1, "InvalidConfig", "step counts must be positive");
}

int TabularQ::greedy(GridPos p) const { return argmax(q.row(index(p)).transpose()); }

Policy TabularQ::policy() const {
  return [table = *this](const Vector& s) { return table.greedy(grid_pos(s)); };
}

TabularResult tabular_q_train(const GridWorld& env, const RewardModel& reward,
                              const TabularConfig& config) {
  config.validate();
  check_reward_dims(env, reward);
  TabularResult result;
  Rng rng(derive_seed(config.seed, "tabular.train"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> random_action(0, env.num_actions() - 1);
  auto world = env.clone();

  // Ties among equal Q-values are broken uniformly so untouched states do not
  // bias exploration toward action 0.
  auto explore_greedy = [&](GridPos p) {
    const auto row = result.table.q.row(TabularQ::index(p));
    const double best = row.maxCoeff();
    int ties[4];
    int count = 0;
    for (int a = 0; a < 4; ++a) {
      if (row(a) == best) ties[count++] = a;
    }
    return ties[std::uniform_int_distribution<int>(0, count - 1)(rng)];
  };

  auto record = [&](std::int64_t env_step) {
    const EvalResult e = evaluate_policy(env, result.table.policy(), 1,
                                         derive_seed(config.seed, "tabular.eval"));
    result.curve.push_back({env_step, e.mean_per_step, e.mean_episodic, e.std_per_step, config.seed});
  };

  const double absorbing_value =
      config.absorbing_terminal ? reward.mean_expert_reward() / (1.0 - config.gamma) : 0.0;

  Vector state = world->reset(rng);
  for (std::int64_t step = 0; step < config.total_steps; ++step) {
    const GridPos pos = grid_pos(state);
    const int action = unit(rng) < config.epsilon ? random_action(rng) : explore_greedy(pos);
    double r = checked_reward(reward, world->joint(state, action));
    StepResult res = world->step(action, rng);
    const bool episode_over = res.terminated || res.truncated;
    if (episode_over) r += reward.terminal_adjustment(r);
    const GridPos next = grid_pos(res.next_state);
    const double bootstrap =
        config.gamma * (res.terminated ? absorbing_value
                                       : result.table.q.row(TabularQ::index(next)).maxCoeff());
    double& q = result.table.at(pos, action);
    q += config.alpha * (r + bootstrap - q);
    state = episode_over ? world->reset(rng) : std::move(res.next_state);

    if ((step + 1) % config.eval_interval == 0 || step + 1 == config.total_steps) record(step + 1);
  }
  require(result.table.q.allFinite(), "NumericalError", "Q-table diverged");
  return result;
}

// ---------------------------------------------------------------------------

MlpSpec default_bc_spec(int state_dim, int num_actions) {
  return MlpSpec{state_dim, {64, 64}, num_actions, Activation::tanh, 1.0};
}

MlpParams behavioral_cloning(const ExpertDataset& data, const MlpSpec& spec, int steps,
                             std::uint64_t seed, const AdamConfig& adam) {
  require(data.size() >= 1, "EmptyDataset", "expert dataset has no pairs");
  data.validate();
  require(data.action_space.kind == ActionSpace::Kind::discrete, "NonDiscreteInput",
          "behavioral cloning here supports discrete actions only");
  spec.validate();
  require(spec.input_dim == data.state_dim() && spec.output_dim == data.action_space.size,
          "ShapeMismatch", "policy network must map states to one logit per action");
  require(steps >= 0, "InvalidConfig", "steps must be >= 0");

  MlpParams net = mlp_init(spec, derive_seed(seed, "bc.net"));
  AdamState state = AdamState::fresh(net, adam);
  const Matrix& inputs = data.states;
  const double n = static_cast<double>(data.size());
  for (int step = 0; step < steps; ++step) {
    ForwardCache cache;
    const Matrix logits = mlp_forward_cached(net, inputs, cache);
    // Cross-entropy of softmax: d/dz = softmax(z) - onehot(label).
    Matrix probs = (logits.rowwise() - logits.colwise().maxCoeff()).array().exp();
    probs.array().rowwise() /= probs.colwise().sum().array();
    const Matrix out_grad = (probs - data.actions) / n;
    adam_update(state, net, mlp_backward(net, cache, out_grad));
  }
  return net;
}

Policy bc_policy(MlpParams net) { return greedy_policy(std::move(net)); }

}  // namespace red
