#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cutoff/density.hpp"
#include "cutoff/lyapunov.hpp"
#include "cutoff/rng.hpp"
#include "oracles.hpp"

using namespace cutoff;

namespace {

PotentialModel ou1(double rate = 1.0) {
  return PotentialModel::ou_diagonal(Eigen::VectorXd::Constant(1, rate));
}

}  // namespace

TEST_SUITE_BEGIN("density");

TEST_CASE("stationary density of a quadratic potential is Gaussian") {
  const double alpha = 1.5, eps = 1e-2;
  const DensityGrid g = stationary_density(ou1(alpha), eps);
  const double var = eps / (2.0 * alpha);
  double max_err = 0.0;
  for (int j = 0; j < g.axes[0].n_nodes(); ++j) {
    const double x = g.axes[0].node(j);
    max_err = std::max(max_err, std::abs(g.values[j] - oracles::normal_pdf(x, 0.0, var)));
  }
  CHECK(max_err < 1e-10 * (1.0 / std::sqrt(2.0 * M_PI * var)) + 1e-10);
  CHECK(g.integral() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("stationary density symmetry and normalization") {
  const PotentialModel m = PotentialModel::quartic_1d(1.0, 1.0);
  const DensityGrid g = stationary_density(m, 1e-2);
  CHECK(std::abs(g.integral() - 1.0) <= 1e-8);
  const int n = g.axes[0].n_nodes();
  for (int j = 0; j < n; ++j)
    CHECK(g.values[j] == g.values[n - 1 - j]);  // even V on a symmetric grid
}

TEST_CASE("2D stationary density normalizes") {
  Eigen::Matrix2d a;
  a << 1.0, 0.2, 0.2, 2.0;
  GridSpec spec;
  spec.cells = 256;
  const DensityGrid g = stationary_density(PotentialModel::quadratic(a), 1e-2, spec);
  CHECK(g.integral() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("gaussian approximation distance") {
  // Exact for quadratic potentials.
  CHECK(gaussian_approx_distance(ou1(2.0), 1e-3) < 1e-8);

  // Strictly decreasing in eps for the truncated quartic.
  const PotentialModel trunc =
      build_truncated_model(PotentialModel::quartic_1d(1.0, 1.0), 2.0);
  const double d2 = gaussian_approx_distance(trunc, 1e-2);
  const double d4 = gaussian_approx_distance(trunc, 1e-4);
  CHECK(d2 > d4);
  CHECK(gaussian_approx_distance(trunc, 1e-5) <= 0.01);
}

TEST_CASE("tv between grids") {
  GridSpec spec;
  spec.cells = 2048;
  const DensityGrid a = stationary_density(ou1(), 1e-2, spec);
  CHECK(tv_between_grids(a, a) == 0.0);

  // Two unit-variance Gaussians with means 0 and 2.
  std::vector<AxisSpec> axes{{-12.0, 14.0, 4096}};
  const DensityGrid g0 =
      gaussian_on_grid(axes, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  const DensityGrid g2 = gaussian_on_grid(axes, Eigen::VectorXd::Constant(1, 2.0),
                                          Eigen::MatrixXd::Identity(1, 1));
  CHECK(tv_between_grids(g0, g2) ==
        doctest::Approx(0.6826894921370859).epsilon(1e-4));

  // Disjointly supported boxes.
  DensityGrid left, right;
  left.axes = {{0.0, 4.0, 400}};
  right.axes = {{0.0, 4.0, 400}};
  left.values.assign(401, 0.0);
  right.values.assign(401, 0.0);
  for (int j = 0; j <= 100; ++j) left.values[j] = 1.0;
  for (int j = 300; j <= 400; ++j) right.values[j] = 1.0;
  left.normalize();
  right.normalize();
  CHECK(tv_between_grids(left, right) == doctest::Approx(1.0).epsilon(1e-8));

  DensityGrid other = right;
  other.axes[0].hi = 5.0;
  CHECK_THROWS_AS(tv_between_grids(left, other), ConfigError);
}

TEST_CASE("fokker-planck against the OU law") {
  const double alpha = 1.0, eps = 1e-2, x0 = 1.0;
  const PotentialModel m = ou1(alpha);
  GridSpec spec;
  spec.cells = 2048;
  const double sigma = std::sqrt(eps / (2.0 * alpha));
  AxisSpec ax{-10.0 * sigma, x0 + 10.0 * sigma, 2048};
  spec.bounds = std::vector<AxisSpec>{ax};
  const double h = ax.step();
  const double dt = 0.9 * std::min(0.25 * h * h / eps, 0.1 / alpha);

  const std::vector<double> snaps{0.5, 1.0, 2.0};
  const FpSolution sol = solve_fokker_planck_1d(m, eps, x0, 2.0, spec, dt, snaps);
  REQUIRE(sol.times.size() == 3);

  for (std::size_t k = 0; k < snaps.size(); ++k) {
    const double t = snaps[k];
    // Initial one-cell Gaussian adds h^2 e^{-2 alpha t} to the variance.
    const double var = oracles::ou_var(alpha, eps, t) +
                       h * h * std::exp(-2.0 * alpha * t);
    const DensityGrid exact = gaussian_on_grid(
        sol.densities[k].axes, Eigen::VectorXd::Constant(1, oracles::ou_mean(alpha, x0, t)),
        Eigen::MatrixXd::Constant(1, 1, var));
    CHECK(tv_between_grids(sol.densities[k], exact) <= 1e-3);
    CHECK(sol.densities[k].integral() == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("fokker-planck relaxes to the stationary density") {
  const PotentialModel m = PotentialModel::quartic_1d(1.0, 1.0);
  const double eps = 1e-2;
  GridSpec spec;
  spec.cells = 1024;
  AxisSpec ax{-1.2, 1.2, 1024};
  spec.bounds = std::vector<AxisSpec>{ax};
  const double h = ax.step();
  const double dt =
      0.9 * std::min(0.25 * h * h / eps, 0.1 / m.hessian_bound(1.2));
  const double t_end = 30.0;
  const FpSolution sol = solve_fokker_planck_1d(m, eps, 0.5, t_end, spec, dt);
  const DensityGrid stat = stationary_density(m, eps, spec);
  CHECK(tv_between_grids(sol.densities.back(), stat) <= 1e-3);
}

TEST_CASE("fokker-planck stationarity is a fixed point") {
  const PotentialModel m = PotentialModel::quartic_1d(1.0, 1.0);
  const double eps = 1e-2;
  GridSpec spec;
  AxisSpec ax{-1.0, 1.0, 512};
  spec.bounds = std::vector<AxisSpec>{ax};
  const DensityGrid stat = stationary_density(m, eps, spec);
  const double h = ax.step();
  const double dt =
      0.9 * std::min(0.25 * h * h / eps, 0.1 / m.hessian_bound(1.0));
  const FpSolution sol =
      solve_fokker_planck_1d(m, eps, 0.0, 10.0, spec, dt, {10.0}, stat);
  CHECK(tv_between_grids(sol.densities.back(), stat) <= 1e-6);
}

TEST_CASE("fokker-planck approach to equilibrium is monotone") {
  const PotentialModel m = ou1();
  const double eps = 1e-2;
  GridSpec spec;
  AxisSpec ax{-0.8, 1.3, 1024};
  spec.bounds = std::vector<AxisSpec>{ax};
  const double h = ax.step();
  const double dt = 0.9 * std::min(0.25 * h * h / eps, 0.1);
  const std::vector<double> snaps{0.5, 1.0, 2.0, 4.0, 8.0};
  const FpSolution sol = solve_fokker_planck_1d(m, eps, 1.0, 8.0, spec, dt, snaps);
  const DensityGrid stat = stationary_density(m, eps, spec);
  double prev = 2.0;
  for (const auto& d : sol.densities) {
    const double tv = tv_between_grids(d, stat);
    CHECK(tv <= prev + 1e-6);
    prev = tv;
  }
}

TEST_CASE("fokker-planck convergence order") {
  const double alpha = 1.0, eps = 1e-2, x0 = 0.8, t = 1.0;
  const PotentialModel m = ou1(alpha);
  auto tv_error_at = [&](int cells) {
    GridSpec spec;
    AxisSpec ax{-0.8, 1.6, cells};
    spec.bounds = std::vector<AxisSpec>{ax};
    const double h = ax.step();
    const double dt = 0.5 * std::min(0.25 * h * h / eps, 0.1 / alpha) *
                      (cells == 256 ? 1.0 : 0.5);
    const FpSolution sol = solve_fokker_planck_1d(m, eps, x0, t, spec, dt, {t});
    const double var = oracles::ou_var(alpha, eps, t) +
                       ax.step() * ax.step() * std::exp(-2.0 * alpha * t);
    const DensityGrid exact = gaussian_on_grid(
        sol.densities[0].axes, Eigen::VectorXd::Constant(1, oracles::ou_mean(alpha, x0, t)),
        Eigen::MatrixXd::Constant(1, 1, var));
    return tv_between_grids(sol.densities[0], exact);
  };
  const double coarse = tv_error_at(256);
  const double fine = tv_error_at(512);
  CHECK(coarse / fine >= 2.0);
}

TEST_CASE("fokker-planck parameter validation") {
  const PotentialModel m = ou1();
  GridSpec spec;
  AxisSpec ax{-1.0, 1.5, 256};
  spec.bounds = std::vector<AxisSpec>{ax};
  // dt above the diffusion stability precondition is rejected up front.
  const double too_big = 0.3 * ax.step() * ax.step() / 1e-2 + 1.0;
  CHECK_THROWS_AS(solve_fokker_planck_1d(m, 1e-2, 1.0, 1.0, spec, too_big),
                  ConfigError);
  Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
  CHECK_THROWS_AS(solve_fokker_planck_1d(PotentialModel::quadratic(a), 1e-2, 1.0,
                                         1.0, spec, 1e-4),
                  ConfigError);
}

TEST_CASE("kde density against the exact Gaussian") {
  RandomStream rs(31, 0);
  std::vector<Eigen::VectorXd> samples;
  samples.reserve(100000);
  for (int i = 0; i < 100000; ++i)
    samples.push_back(Eigen::VectorXd::Constant(1, rs.normal()));
  GridSpec spec;
  spec.cells = 1024;
  const DensityGrid kde = kde_density(samples, BandwidthRule::scott(), spec);
  const DensityGrid exact = gaussian_on_grid(kde.axes, Eigen::VectorXd::Zero(1),
                                             Eigen::MatrixXd::Identity(1, 1));
  CHECK(tv_between_grids(kde, exact) <= 0.02);

  // Determinism on a duplicated sample set.
  const DensityGrid again = kde_density(samples, BandwidthRule::scott(), spec);
  CHECK(again.values == kde.values);
}

TEST_CASE("scott bandwidth arithmetic") {
  CHECK(scott_bandwidth(10000, 1.0, 1) == doctest::Approx(0.15848931924611134).epsilon(1e-12));
}

TEST_CASE("kde input validation") {
  std::vector<Eigen::VectorXd> few(50, Eigen::VectorXd::Zero(1));
  CHECK_THROWS_AS(kde_density(few, BandwidthRule::scott()), ConfigError);
  std::vector<Eigen::VectorXd> degenerate(200, Eigen::VectorXd::Constant(1, 3.0));
  CHECK_THROWS_AS(kde_density(degenerate, BandwidthRule::scott()), ConfigError);
}

TEST_CASE("fokker-planck marginals match the linearized Gaussian law") {
  // For quadratic potentials the FP solution is the (psi, Delta) Gaussian.
  const double alpha = 2.0, eps = 5e-3, x0 = 0.6, t = 1.2;
  const PotentialModel m = ou1(alpha);
  GridSpec spec;
  AxisSpec ax{-0.4, 0.9, 2048};
  spec.bounds = std::vector<AxisSpec>{ax};
  const double h = ax.step();
  const double dt = 0.9 * std::min(0.25 * h * h / eps, 0.1 / alpha);
  const FpSolution sol = solve_fokker_planck_1d(m, eps, x0, t, spec, dt, {t});

  const LyapunovSolution lyap = integrate_lyapunov(
      m, eps, t, LyapunovMode::AlongFlow, Eigen::VectorXd::Constant(1, x0));
  const SemiflowResult flow = integrate_semiflow(m, Eigen::VectorXd::Constant(1, x0), t);
  const double var = lyap.terminal()(0, 0) + h * h * std::exp(-2.0 * alpha * t);
  const DensityGrid law = gaussian_on_grid(
      sol.densities[0].axes, flow.states.back(), Eigen::MatrixXd::Constant(1, 1, var));
  CHECK(tv_between_grids(sol.densities[0], law) <= 1e-3);
}


TEST_CASE("density grid CSV serialization") {
  const DensityGrid g = stationary_density(ou1(), 1e-2);
  const std::string path = "/tmp/cutoff_density.csv";
  g.write_csv(path);
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == "x,density");
  int rows = 0;
  std::string line;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == g.axes[0].n_nodes());
  std::filesystem::remove(path);
}

TEST_SUITE_END();

