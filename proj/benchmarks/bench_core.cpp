#include <benchmark/benchmark.h>

#include "cutoff/density.hpp"
#include "cutoff/gaussian_tv.hpp"
#include "cutoff/lyapunov.hpp"
#include "cutoff/rng.hpp"
#include "cutoff/sde.hpp"

namespace {

using namespace cutoff;

void BM_PhiloxBlock(benchmark::State& state) {
  std::array<std::uint64_t, 4> ctr{0, 0, 0, 0};
  for (auto _ : state) {
    ++ctr[0];
    benchmark::DoNotOptimize(Philox4x64::block(ctr, {42, 7}));
  }
}
BENCHMARK(BM_PhiloxBlock);

void BM_NormalDraws(benchmark::State& state) {
  RandomStream rs(1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(rs.normal());
}
BENCHMARK(BM_NormalDraws);

void BM_TvGeneral(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  mu(0) = 1.2;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d);
  if (d > 1) cov(0, 1) = cov(1, 0) = 0.3;
  const GaussianDist a(mu, SpdMatrix(cov));
  const GaussianDist b = GaussianDist::standard(d);
  for (auto _ : state) benchmark::DoNotOptimize(tv_general(a, b));
}
BENCHMARK(BM_TvGeneral)->Arg(1)->Arg(2)->Arg(3);

void BM_EulerMaruyamaOu(benchmark::State& state) {
  const auto model = PotentialModel::ou_diagonal(Eigen::VectorXd::Ones(1));
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  TimeGrid grid;
  grid.t_end = 1.0;
  grid.n_steps = 1000;
  const int paths = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        simulate_paths(model, 1e-2, x0, grid, paths, 3, 1, 1000));
  }
  state.SetItemsProcessed(state.iterations() * paths * grid.n_steps);
}
BENCHMARK(BM_EulerMaruyamaOu)->Arg(64)->Arg(512);

void BM_FokkerPlanck(benchmark::State& state) {
  const auto model = PotentialModel::quartic_1d(1.0, 1.0);
  const double eps = 1e-2;
  GridSpec spec;
  AxisSpec ax{-1.2, 1.4, static_cast<int>(state.range(0))};
  spec.bounds = std::vector<AxisSpec>{ax};
  const double h = ax.step();
  const double dt = 0.9 * std::min(0.25 * h * h / eps, 0.1 / 13.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        solve_fokker_planck_1d(model, eps, 1.0, 0.05, spec, dt));
  }
}
BENCHMARK(BM_FokkerPlanck)->Arg(1024)->Arg(2048);

void BM_LyapunovAlongFlow(benchmark::State& state) {
  const auto model = PotentialModel::quartic_1d(1.0, 1.0);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        integrate_lyapunov(model, 1e-3, 5.0, LyapunovMode::AlongFlow, x0));
  }
}
BENCHMARK(BM_LyapunovAlongFlow);

}  // namespace

BENCHMARK_MAIN();
