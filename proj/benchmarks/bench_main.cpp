#include <random>

#include <benchmark/benchmark.h>

#include "red/envs.hpp"
#include "red/estimators.hpp"
#include "red/kernel_support.hpp"
#include "red/nn.hpp"
#include "red/rl.hpp"

namespace {

using namespace red;

Matrix random_inputs(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

void BM_MlpForward(benchmark::State& state) {
  const MlpParams net = mlp_init(default_rnd_predictor_spec(3), 1);
  const Matrix x = random_inputs(3, static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward_batch(net, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForward)->Arg(1)->Arg(32)->Arg(100);

void BM_MlpGrad(benchmark::State& state) {
  const MlpParams net = mlp_init(default_rnd_predictor_spec(3), 1);
  const auto n = static_cast<int>(state.range(0));
  const Matrix x = random_inputs(3, n, 2);
  const Matrix t = random_inputs(32, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_mse_grad(net, x, t));
}
BENCHMARK(BM_MlpGrad)->Arg(32)->Arg(100);

// One full-batch RND training step on 100 expert pairs.
void BM_RndStep(benchmark::State& state) {
  const ExpertDataset data = generate_expert_dataset(EnvKind::simple, 100, 4);
  const MlpSpec target = default_rnd_target_spec(3);
  const MlpSpec predictor = default_rnd_predictor_spec(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_rnd(data, target, predictor, 1, 5));
  }
}
BENCHMARK(BM_RndStep);

void BM_KernelScore(benchmark::State& state) {
  const Matrix points = random_inputs(3, static_cast<int>(state.range(0)), 6);
  const KernelSupportModel model = fit_kernel_support(points, KernelSpec{median_bandwidth(points)});
  const Vector x = random_inputs(3, 1, 7).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(kernel_score(model, x));
}
BENCHMARK(BM_KernelScore)->Arg(50)->Arg(200);

void BM_KernelFit(benchmark::State& state) {
  const Matrix points = random_inputs(3, static_cast<int>(state.range(0)), 6);
  const KernelSpec spec{median_bandwidth(points)};
  for (auto _ : state) benchmark::DoNotOptimize(fit_kernel_support(points, spec));
}
BENCHMARK(BM_KernelFit)->Arg(50)->Arg(200);

void BM_DqnSteps(benchmark::State& state) {
  const RewardModel reward(std::make_shared<ConstantScorer>(3, 0.0), 1.0, 1.0);
  DqnConfig config;
  config.total_steps = 1000;
  config.eval_interval = 1000;
  config.eval_episodes = 1;
  for (auto _ : state) benchmark::DoNotOptimize(dqn_train(SimpleDomain{}, reward, config));
  state.SetItemsProcessed(state.iterations() * config.total_steps);
}
BENCHMARK(BM_DqnSteps)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
