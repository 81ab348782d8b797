#include "red/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "red/error.hpp"
#include "red/format.hpp"
#include "red/seed.hpp"

namespace red {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Rejects keys outside `allowed` so typos fail loudly.
void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  require(j.is_object(), "InvalidConfig", std::string(where) + " must be a JSON object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    require(known, "InvalidConfig", "unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    out = j.at(key).get<T>();
  }
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "IoError", "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json_file(const fs::path& path, const char* missing_kind) {
  std::ifstream in(path);
  if (!in) fail(missing_kind, path.string() + " not found");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail("InvalidConfig", path.string() + ": " + e.what());
  }
}

int report_error(const std::string& kind, const std::string& message, const fs::path& out_dir,
                 std::ostream& err) {
  const json j = {{"kind", kind}, {"message", message}};
  err << j.dump() << '\n';
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!ec) {
    std::ofstream f(out_dir / "error.json");
    if (f) f << j.dump(2) << '\n';
  }
  return exit_code_for(kind);
}

template <typename Fn>
int guarded(const fs::path& out_dir, std::ostream& err, Fn&& body) {
  try {
    body();
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e.kind(), e.message(), out_dir, err);
  } catch (const json::exception& e) {
    return report_error("InvalidConfig", e.what(), out_dir, err);
  } catch (const std::exception& e) {
    return report_error("RuntimeFailure", e.what(), out_dir, err);
  }
}

json sigma1_json(double sigma1) { return std::isinf(sigma1) ? json("inf") : json(sigma1); }

struct FitArtifacts {
  ExpertDataset data;
  ScorerPtr scorer;
  LossStats stats;
  RewardModel reward;
};

FitArtifacts fit_and_write(const RunConfig& config) {
  fs::create_directories(config.out_dir);
  ExpertDataset data = resolve_dataset(config);
  ScorerPtr scorer = fit_scorer(config, data);
  LossStats stats = loss_stats(*scorer, data);
  RewardModel reward = build_reward_model(config, scorer, data);

  save_dataset(data, config.out_dir / "dataset.csv");
  write_json(config.out_dir / "scorer.json", scorer->to_json());
  json stats_json = to_json(stats);
  stats_json["descriptor"] = scorer->descriptor();
  write_json(config.out_dir / "loss_stats.json", stats_json);
  write_json(config.out_dir / "reward.json", reward_model_json(reward, "scorer.json"));
  return {std::move(data), std::move(scorer), std::move(stats), std::move(reward)};
}

std::vector<RewardMapRow> expert_pair_rows(const RewardModel& model, const ExpertDataset& data,
                                           EnvKind env, double viz_alpha) {
  const Matrix inputs = data.joint_inputs();
  std::vector<RewardMapRow> rows;
  for (Eigen::Index i = 0; i < inputs.cols(); ++i) {
    const double score = model.scorer().score(inputs.col(i));
    const int a = data.action_index(i);
    const double s = env == EnvKind::simple
                         ? data.states(0, i)
                         : static_cast<double>(TabularQ::index(grid_pos(data.states.col(i))));
    const double a_value = env == EnvKind::simple ? simple_action_value(a) : static_cast<double>(a);
    rows.push_back({s, a_value, score, red_reward(model.sigma1(), score), viz_reward(viz_alpha, score)});
  }
  return rows;
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kernel: return "kernel";
    case EstimatorKind::rnd: return "rnd";
    case EstimatorKind::ae: return "ae";
    case EstimatorKind::exact: return "exact";
  }
  return "unknown";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  if (name == "kernel") return EstimatorKind::kernel;
  if (name == "rnd") return EstimatorKind::rnd;
  if (name == "ae") return EstimatorKind::ae;
  if (name == "exact") return EstimatorKind::exact;
  fail("InvalidConfig", "unknown estimator kind '" + name + "'");
}

int exit_code_for(const std::string& kind) {
  static const std::set<std::string> input_errors = {
      "InvalidConfig", "ConfigNotFound", "DatasetNotFound", "InvalidDataset", "ModelNotFound",
      "InvalidModel",  "UnsupportedFormat", "EmptyGrid", "EmptySweep", "NoRuns", "InvalidCount",
      "InvalidSpec"};
  return input_errors.contains(kind) ? kExitInputError : kExitRuntimeError;
}

RunConfig parse_run_config(const json& j) {
  check_keys(j, "config",
             {"estimator", "reward", "env", "dataset", "dqn", "tabular", "score_grid", "out", "seed"});
  RunConfig c;
  if (j.contains("env")) c.env = env_kind_from_string(j.at("env").get<std::string>());
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    check_keys(e, "estimator",
               {"kind", "steps", "lr", "target_hidden", "predictor_hidden", "embedding_dim",
                "target_init_scale", "ae_hidden", "ae_weight_decay", "ae_lr", "kernel_bandwidth", "kernel_exponent", "kernel_m",
                "kernel_ridge"});
    auto& est = c.estimator;
    if (e.contains("kind")) est.kind = estimator_kind_from_string(e.at("kind").get<std::string>());
    read(e, "steps", est.steps);
    read(e, "lr", est.lr);
    read(e, "target_hidden", est.target_hidden);
    read(e, "predictor_hidden", est.predictor_hidden);
    read(e, "embedding_dim", est.embedding_dim);
    read(e, "target_init_scale", est.target_init_scale);
    read(e, "ae_hidden", est.ae_hidden);
    read(e, "ae_weight_decay", est.ae_weight_decay);
    read(e, "ae_lr", est.ae_lr);
    read_optional(e, "kernel_bandwidth", est.kernel_bandwidth);
    if (e.contains("kernel_exponent")) {
      est.kernel_exponent = kernel_exponent_from_string(e.at("kernel_exponent").get<std::string>());
    }
    if (e.contains("kernel_m")) {
      const auto& m = e.at("kernel_m");
      if (m.is_null() || (m.is_string() && m.get<std::string>() == "auto")) {
        est.kernel_m.reset();
      } else {
        est.kernel_m = m.get<int>();
      }
    }
    read_optional(e, "kernel_ridge", est.kernel_ridge);
  }
  if (j.contains("reward")) {
    const auto& r = j.at("reward");
    check_keys(r, "reward", {"rho", "quantile", "terminal", "sigma1", "sigma2", "sigma3", "viz_alpha"});
    read(r, "rho", c.reward.rho);
    read(r, "quantile", c.reward.quantile);
    read(r, "terminal", c.reward.terminal);
    read(r, "sigma2", c.reward.sigma2);
    read(r, "sigma3", c.reward.sigma3);
    read(r, "viz_alpha", c.reward.viz_alpha);
    if (r.contains("sigma1") && !r.at("sigma1").is_null()) {
      const auto& s1 = r.at("sigma1");
      if (s1.is_string()) {
        require(s1.get<std::string>() == "inf", "InvalidConfig", "reward.sigma1 must be a number, \"inf\" or null");
        c.reward.sigma1 = std::numeric_limits<double>::infinity();
      } else {
        c.reward.sigma1 = s1.get<double>();
      }
      require(*c.reward.sigma1 > 0.0, "InvalidConfig", "reward.sigma1 must be positive");
    }
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, "dataset", {"path", "n"});
    if (d.contains("path") && !d.at("path").is_null()) c.dataset.path = d.at("path").get<std::string>();
    read(d, "n", c.dataset.n);
  }
  if (j.contains("dqn")) {
    const auto& q = j.at("dqn");
    check_keys(q, "dqn",
               {"hidden", "activation", "gamma", "epsilon_start", "epsilon_end",
                "epsilon_decay_steps", "replay_capacity", "batch_size", "target_sync",
                "total_steps", "lr", "eval_interval", "eval_episodes"});
    auto& d = c.dqn;
    read(q, "hidden", d.q_net.hidden_dims);
    if (q.contains("activation")) d.q_net.activation = activation_from_string(q.at("activation").get<std::string>());
    read(q, "gamma", d.gamma);
    read(q, "epsilon_start", d.epsilon.start);
    read(q, "epsilon_end", d.epsilon.end);
    read(q, "epsilon_decay_steps", d.epsilon.decay_steps);
    read(q, "replay_capacity", d.replay_capacity);
    read(q, "batch_size", d.batch_size);
    read(q, "target_sync", d.target_sync);
    read(q, "total_steps", d.total_steps);
    read(q, "lr", d.lr);
    read(q, "eval_interval", d.eval_interval);
    read(q, "eval_episodes", d.eval_episodes);
  }
  if (j.contains("tabular")) {
    const auto& t = j.at("tabular");
    check_keys(t, "tabular",
               {"alpha", "gamma", "epsilon", "total_steps", "eval_interval", "absorbing_terminal"});
    read(t, "alpha", c.tabular.alpha);
    read(t, "gamma", c.tabular.gamma);
    read(t, "epsilon", c.tabular.epsilon);
    read(t, "total_steps", c.tabular.total_steps);
    read(t, "eval_interval", c.tabular.eval_interval);
    read(t, "absorbing_terminal", c.tabular.absorbing_terminal);
  }
  if (j.contains("score_grid")) {
    const auto& g = j.at("score_grid");
    check_keys(g, "score_grid", {"points", "lo", "hi", "expert_pairs_only"});
    read(g, "points", c.score_grid.points);
    read(g, "lo", c.score_grid.lo);
    read(g, "hi", c.score_grid.hi);
    read(g, "expert_pairs_only", c.score_grid.expert_pairs_only);
  }
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
  read(j, "seed", c.seed);

  const auto env = make_environment(c.env);
  c.dqn.q_net.input_dim = env->state_dim();
  c.dqn.q_net.output_dim = env->num_actions();
  c.dqn.seed = derive_seed(c.seed, "rl");
  c.tabular.seed = derive_seed(c.seed, "rl");
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_json_file(path, "ConfigNotFound"));
}

json run_config_json(const RunConfig& c) {
  const auto& e = c.estimator;
  json kernel_m = e.kernel_m ? json(*e.kernel_m) : json("auto");
  return {
      {"estimator",
       {{"kind", to_string(e.kind)},
        {"steps", e.steps},
        {"lr", e.lr},
        {"target_hidden", e.target_hidden},
        {"predictor_hidden", e.predictor_hidden},
        {"embedding_dim", e.embedding_dim},
        {"target_init_scale", e.target_init_scale},
        {"ae_hidden", e.ae_hidden},
        {"ae_weight_decay", e.ae_weight_decay},
        {"ae_lr", e.ae_lr},
        {"kernel_bandwidth", optional_json(e.kernel_bandwidth)},
        {"kernel_exponent", to_string(e.kernel_exponent)},
        {"kernel_m", kernel_m},
        {"kernel_ridge", optional_json(e.kernel_ridge)}}},
      {"reward",
       {{"rho", c.reward.rho},
        {"quantile", c.reward.quantile},
        {"terminal", c.reward.terminal},
        {"sigma2", c.reward.sigma2},
        {"sigma3", c.reward.sigma3},
        {"viz_alpha", c.reward.viz_alpha},
        {"sigma1", c.reward.sigma1 ? sigma1_json(*c.reward.sigma1) : json(nullptr)}}},
      {"env", to_string(c.env)},
      {"dataset",
       {{"path", c.dataset.path ? json(c.dataset.path->generic_string()) : json(nullptr)},
        {"n", c.dataset.n}}},
      {"dqn",
       {{"hidden", c.dqn.q_net.hidden_dims},
        {"activation", to_string(c.dqn.q_net.activation)},
        {"gamma", c.dqn.gamma},
        {"epsilon_start", c.dqn.epsilon.start},
        {"epsilon_end", c.dqn.epsilon.end},
        {"epsilon_decay_steps", c.dqn.epsilon.decay_steps},
        {"replay_capacity", c.dqn.replay_capacity},
        {"batch_size", c.dqn.batch_size},
        {"target_sync", c.dqn.target_sync},
        {"total_steps", c.dqn.total_steps},
        {"lr", c.dqn.lr},
        {"eval_interval", c.dqn.eval_interval},
        {"eval_episodes", c.dqn.eval_episodes}}},
      {"tabular",
       {{"alpha", c.tabular.alpha},
        {"gamma", c.tabular.gamma},
        {"epsilon", c.tabular.epsilon},
        {"total_steps", c.tabular.total_steps},
        {"eval_interval", c.tabular.eval_interval},
        {"absorbing_terminal", c.tabular.absorbing_terminal}}},
      {"score_grid",
       {{"points", c.score_grid.points},
        {"lo", c.score_grid.lo},
        {"hi", c.score_grid.hi},
        {"expert_pairs_only", c.score_grid.expert_pairs_only}}},
      {"out", c.out_dir.generic_string()},
      {"seed", c.seed}};
}

SweepConfig parse_sweep_config(const json& j) {
  check_keys(j, "sweep", {"base", "estimators", "sizes", "seeds"});
  SweepConfig s;
  s.base = parse_run_config(j.value("base", json::object()));
  for (const auto& e : j.value("estimators", json::array())) {
    s.estimators.push_back(estimator_kind_from_string(e.get<std::string>()));
  }
  s.sizes = j.value("sizes", std::vector<int>{});
  s.seeds = j.value("seeds", 5);
  require(!s.estimators.empty() && !s.sizes.empty() && s.seeds >= 1, "EmptySweep",
          "sweep needs at least one estimator, one dataset size and one seed");
  for (int n : s.sizes) require(n >= 1, "InvalidCount", "dataset sizes must be >= 1");
  return s;
}

// ---------------------------------------------------------------------------

RewardModel build_reward_model(const RunConfig& config, ScorerPtr scorer, const ExpertDataset& data) {
  std::optional<TerminalParams> terminal;
  if (config.reward.terminal) terminal = TerminalParams{config.reward.sigma2, config.reward.sigma3};
  std::optional<double> sigma1 = config.reward.sigma1;
  if (!sigma1 && config.estimator.kind == EstimatorKind::exact) {
    sigma1 = std::numeric_limits<double>::infinity();
  }
  if (sigma1) {
    const double r_bar = mean_expert_reward(*scorer, *sigma1, data);
    return RewardModel(std::move(scorer), *sigma1, r_bar, terminal);
  }
  return calibrate_reward(std::move(scorer), data,
                          CalibrationOptions{config.reward.rho, config.reward.quantile}, terminal);
}

ExpertDataset resolve_dataset(const RunConfig& config) {
  if (config.dataset.path) return load_dataset(*config.dataset.path);
  return generate_expert_dataset(config.env, config.dataset.n, derive_seed(config.seed, "dataset"));
}

ScorerPtr fit_scorer(const RunConfig& config, const ExpertDataset& data) {
  data.validate();
  const auto& e = config.estimator;
  const int dim = data.input_dim();
  const std::uint64_t seed = derive_seed(config.seed, "estimator");
  switch (e.kind) {
    case EstimatorKind::kernel: {
      const Matrix points = data.joint_inputs();
      KernelSpec spec{e.kernel_bandwidth ? *e.kernel_bandwidth : median_bandwidth(points),
                      e.kernel_exponent};
      return std::make_shared<KernelScorer>(
          fit_kernel_support(points, spec, KernelFitOptions{e.kernel_m, e.kernel_ridge}));
    }
    case EstimatorKind::rnd: {
      const MlpSpec target{dim, e.target_hidden, e.embedding_dim, Activation::tanh,
                          e.target_init_scale};
      const MlpSpec predictor{dim, e.predictor_hidden, e.embedding_dim, Activation::tanh, 1.0};
      return std::make_shared<RndScorer>(
          fit_rnd(data, target, predictor, e.steps, seed, AdamConfig{e.lr}));
    }
    case EstimatorKind::ae: {
      const MlpSpec spec{dim, e.ae_hidden, dim, Activation::tanh, 1.0};
      return std::make_shared<AeScorer>(
          fit_autoencoder(data, spec, e.ae_weight_decay, e.steps, seed, AdamConfig{e.ae_lr}));
    }
    case EstimatorKind::exact:
      return std::make_shared<ExactScorer>(fit_exact(data));
  }
  fail("InvalidConfig", "unknown estimator kind");
}

LossStats loss_stats(const SupportScorer& scorer, const ExpertDataset& data) {
  const Vector scores = scorer.score_batch(data.joint_inputs());
  LossStats s;
  s.losses.assign(scores.data(), scores.data() + scores.size());
  s.q50 = nearest_rank_quantile(s.losses, 0.5);
  s.q90 = nearest_rank_quantile(s.losses, 0.9);
  s.max = *std::max_element(s.losses.begin(), s.losses.end());
  return s;
}

json to_json(const LossStats& stats) {
  return {{"losses", stats.losses},
          {"quantiles", {{"q50", stats.q50}, {"q90", stats.q90}, {"max", stats.max}}},
          {"format_version", 1}};
}

std::vector<RewardMapRow> reward_map(const RewardModel& model, const GridSpec& grid, double viz_alpha) {
  require(grid.points >= 1, "EmptyGrid", "reward map grid has no points");
  require(model.input_dim() == 3, "ShapeMismatch", "state grids are defined for the simple domain");
  std::vector<RewardMapRow> rows;
  rows.reserve(static_cast<std::size_t>(grid.points) * 2);
  for (int i = 0; i < grid.points; ++i) {
    const double s = grid.points == 1 ? grid.lo
                                      : grid.lo + (grid.hi - grid.lo) * i / (grid.points - 1);
    for (int a = 0; a < 2; ++a) {
      const Vector x = joint_input(Vector::Constant(1, s), one_hot(a, 2));
      const double score = model.scorer().score(x);
      rows.push_back({s, simple_action_value(a), score, red_reward(model.sigma1(), score),
                      viz_reward(viz_alpha, score)});
    }
  }
  return rows;
}

std::string reward_map_csv(const std::vector<RewardMapRow>& rows) {
  std::ostringstream out;
  out << kRewardMapCsvHeader << '\n';
  for (const auto& r : rows) {
    out << format_double(r.s) << ',' << format_double(r.a) << ',' << format_double(r.score) << ','
        << format_double(r.reward) << ',' << format_double(r.viz_reward) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

int cmd_fit(const RunConfig& config, std::ostream& err) {
  return guarded(config.out_dir, err, [&] { fit_and_write(config); });
}

int cmd_score(const RunConfig& config, std::ostream& err) {
  return guarded(config.out_dir, err, [&] {
    const fs::path reward_path = config.out_dir / "reward.json";
    if (!fs::exists(reward_path)) {
      fail("ModelNotFound", "no fitted model in " + config.out_dir.string() + " (run `red fit` first)");
    }
    const RewardModel model =
        reward_model_from_json(read_json_file(reward_path, "ModelNotFound"), config.out_dir);
    std::vector<RewardMapRow> rows;
    if (config.score_grid.expert_pairs_only) {
      const fs::path data_path = config.out_dir / "dataset.csv";
      rows = expert_pair_rows(model, load_dataset(data_path), config.env, config.reward.viz_alpha);
    } else {
      rows = reward_map(model, config.score_grid, config.reward.viz_alpha);
    }
    write_text(config.out_dir / "reward_map.csv", reward_map_csv(rows));
  });
}

TrainOutcome run_training(const RunConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  FitArtifacts fit = fit_and_write(config);
  TrainOutcome outcome;
  outcome.sigma1 = fit.reward.sigma1();
  outcome.mean_expert_reward = fit.reward.mean_expert_reward();
  outcome.scorer_descriptor = fit.scorer->descriptor();

  json policy;
  if (config.env == EnvKind::simple) {
    const SimpleDomain env;
    DqnResult result = dqn_train(env, fit.reward, config.dqn);
    outcome.curve = std::move(result.curve);
    policy = {{"kind", "dqn"}, {"q_net", to_json(result.q_net)}, {"format_version", 1}};
    write_text(config.out_dir / "reward_map.csv",
               reward_map_csv(reward_map(fit.reward, config.score_grid, config.reward.viz_alpha)));
  } else {
    const GridWorld env;
    TabularResult result = tabular_q_train(env, fit.reward, config.tabular);
    outcome.curve = std::move(result.curve);
    int matches = 0;
    for (Eigen::Index i = 0; i < fit.data.size(); ++i) {
      const GridPos pos = grid_pos(fit.data.states.col(i));
      matches += result.table.greedy(pos) == fit.data.action_index(i) ? 1 : 0;
    }
    outcome.expert_agreement = static_cast<double>(matches) / static_cast<double>(fit.data.size());
    json rows = json::array();
    for (Eigen::Index r = 0; r < result.table.q.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index a = 0; a < result.table.q.cols(); ++a) row.push_back(result.table.q(r, a));
      rows.push_back(std::move(row));
    }
    policy = {{"kind", "tabular"},
              {"width", kGridWidth},
              {"height", kGridHeight},
              {"q", std::move(rows)},
              {"format_version", 1}};
  }
  write_text(config.out_dir / "curve.csv", curve_csv(outcome.curve));
  write_json(config.out_dir / "policy.json", policy);

  json curve = json::array();
  for (const auto& r : outcome.curve) {
    curve.push_back({{"env_step", r.env_step},
                     {"true_reward_per_step", r.true_reward_per_step},
                     {"true_reward_per_episode", r.true_reward_per_episode},
                     {"eval_std", r.eval_std},
                     {"seed", r.seed}});
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json record = {{"format_version", 1},
                 {"config", run_config_json(config)},
                 {"scorer",
                  {{"descriptor", outcome.scorer_descriptor},
                   {"q50", fit.stats.q50},
                   {"q90", fit.stats.q90},
                   {"max", fit.stats.max}}},
                 {"sigma1", sigma1_json(outcome.sigma1)},
                 {"mean_expert_reward", outcome.mean_expert_reward},
                 {"curve", std::move(curve)},
                 {"wall_clock_seconds", wall}};
  if (outcome.expert_agreement) record["expert_agreement"] = *outcome.expert_agreement;
  write_json(config.out_dir / "run_record.json", record);
  return outcome;
}

int cmd_train(const RunConfig& config, std::ostream& err) {
  return guarded(config.out_dir, err, [&] { run_training(config); });
}

int cmd_experiment(const SweepConfig& sweep, int jobs, std::ostream& err) {
  struct Cell {
    EstimatorKind estimator;
    int n;
    int seed;
    std::string status = "ok";
    double final_per_step = std::nan("");
    double final_per_episode = std::nan("");
  };
  std::vector<Cell> cells;
  for (auto est : sweep.estimators) {
    for (int n : sweep.sizes) {
      for (int s = 0; s < sweep.seeds; ++s) cells.push_back({est, n, s});
    }
  }
  const fs::path out_dir = sweep.base.out_dir;
  return guarded(out_dir, err, [&] {
    require(!cells.empty(), "EmptySweep", "sweep has no cells");
    fs::create_directories(out_dir / "cells");
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        Cell& cell = cells[i];
        RunConfig cfg = sweep.base;
        cfg.estimator.kind = cell.estimator;
        cfg.dataset.path.reset();
        cfg.dataset.n = cell.n;
        cfg.seed = sweep.base.seed + static_cast<std::uint64_t>(cell.seed);
        cfg.dqn.seed = derive_seed(cfg.seed, "rl");
        cfg.tabular.seed = derive_seed(cfg.seed, "rl");
        cfg.out_dir = out_dir / "cells" /
                      (std::string(to_string(cell.estimator)) + "_n" + std::to_string(cell.n) +
                       "_s" + std::to_string(cell.seed));
        try {
          const TrainOutcome outcome = run_training(cfg);
          require(!outcome.curve.empty(), "EmptyCurve", "run produced no evaluation rows");
          cell.final_per_step = outcome.curve.back().true_reward_per_step;
          cell.final_per_episode = outcome.curve.back().true_reward_per_episode;
        } catch (const Error& e) {
          cell.status = "failed:" + e.kind();
          std::lock_guard lock(err_mutex);
          err << json{{"kind", e.kind()}, {"message", e.message()}, {"cell", cfg.out_dir.filename().string()}}.dump()
              << '\n';
        } catch (const std::exception& e) {
          cell.status = "failed:RuntimeFailure";
          std::lock_guard lock(err_mutex);
          err << json{{"kind", "RuntimeFailure"}, {"message", e.what()}, {"cell", cfg.out_dir.filename().string()}}.dump()
              << '\n';
        }
      }
    };
    const int workers = std::clamp(jobs, 1, static_cast<int>(cells.size()));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::ostringstream csv;
    csv << "estimator,n,seed,final_per_step,final_per_episode,status\n";
    for (const auto& c : cells) {
      csv << to_string(c.estimator) << ',' << c.n << ',' << c.seed << ','
          << format_double(c.final_per_step) << ',' << format_double(c.final_per_episode) << ','
          << c.status << '\n';
    }
    write_text(out_dir / "experiment.csv", csv.str());

    std::ostringstream summary;
    summary << "estimator,n,mean_final_per_step,std_final_per_step,completed\n";
    for (auto est : sweep.estimators) {
      for (int n : sweep.sizes) {
        std::vector<double> vals;
        for (const auto& c : cells) {
          if (c.estimator == est && c.n == n && c.status == "ok") vals.push_back(c.final_per_step);
        }
        double mean = 0.0;
        double var = 0.0;
        for (double v : vals) mean += v;
        if (!vals.empty()) mean /= static_cast<double>(vals.size());
        for (double v : vals) var += (v - mean) * (v - mean);
        const double sd = vals.empty() ? 0.0 : std::sqrt(var / static_cast<double>(vals.size()));
        summary << to_string(est) << ',' << n << ',' << format_double(vals.empty() ? std::nan("") : mean)
                << ',' << format_double(sd) << ',' << vals.size() << '\n';
      }
    }
    write_text(out_dir / "experiment_summary.csv", summary.str());

    const auto failed = std::count_if(cells.begin(), cells.end(),
                                      [](const Cell& c) { return c.status != "ok"; });
    if (failed > 0) {
      fail("SweepCellsFailed", std::to_string(failed) + " of " + std::to_string(cells.size()) +
                                   " sweep cells failed; see experiment.csv");
    }
  });
}

}  // namespace red
