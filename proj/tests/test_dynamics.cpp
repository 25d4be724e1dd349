#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cutoff/lyapunov.hpp"
#include "cutoff/semiflow.hpp"
#include "oracles.hpp"

using namespace cutoff;

namespace {

PotentialModel ou2() {
  Eigen::VectorXd rates(2);
  rates << 1.0, 2.0;
  return PotentialModel::ou_diagonal(rates);
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

void check_decay(const SemiflowResult& flow, double delta) {
  const double x0n = flow.x0.norm();
  for (int k = 0; k < flow.times.size(); ++k) {
    CHECK(flow.states[k].norm() <=
          x0n * std::exp(-delta * flow.times(k)) * (1.0 + 1e-6));
  }
}

}  // namespace

TEST_SUITE_BEGIN("dynamics");

TEST_CASE("semiflow matches the linear closed form") {
  const PotentialModel m = ou2();
  const Eigen::VectorXd x0 = vec2(3.0, -1.5);
  const SemiflowResult flow = integrate_semiflow(m, x0, 5.0);
  CHECK(flow.states[0].isApprox(x0));
  for (int k = 0; k < flow.times.size(); ++k) {
    const double t = flow.times(k);
    CHECK(std::abs(flow.states[k](0) - 3.0 * std::exp(-t)) < 1e-10);
    CHECK(std::abs(flow.states[k](1) + 1.5 * std::exp(-2.0 * t)) < 1e-10);
  }
}

TEST_CASE("decay invariant for the three test models") {
  check_decay(integrate_semiflow(PotentialModel::ou_diagonal(
                                     Eigen::VectorXd::Ones(1)),
                                 Eigen::VectorXd::Ones(1), 10.0),
              1.0);
  Eigen::Matrix2d a;
  a << 2.0, 0.4, 0.4, 1.2;
  const PotentialModel quad = PotentialModel::quadratic(a);
  check_decay(integrate_semiflow(quad, vec2(1.0, 2.0), 10.0),
              quad.declared_delta());
  const PotentialModel trunc =
      build_truncated_model(PotentialModel::quartic_1d(1.0, 1.0), 2.0);
  check_decay(integrate_semiflow(trunc, Eigen::VectorXd::Ones(1), 10.0), 1.0);
}

TEST_CASE("quartic decay and step-halving cross-check") {
  const PotentialModel m = PotentialModel::quartic_1d(1.0, 1.0);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  const SemiflowResult flow = integrate_semiflow(m, x0, 10.0);
  CHECK(flow.states.back().norm() <= std::exp(-10.0) * (1.0 + 1e-6));

  StepControl halved;
  halved.h = 0.005;
  const SemiflowResult fine = integrate_semiflow(m, x0, 10.0, halved);
  CHECK(std::abs(flow.states.back()(0) - fine.states.back()(0)) < 1e-10);
}

TEST_CASE("semiflow rejects bad inputs") {
  const PotentialModel m = PotentialModel::quartic_1d(1.0, 1.0);
  CHECK_THROWS_AS(integrate_semiflow(m, Eigen::VectorXd::Zero(1), 1.0), ConfigError);
  CHECK_THROWS_AS(integrate_semiflow(m, Eigen::VectorXd::Ones(1), -1.0), ConfigError);
  StepControl tiny;
  tiny.h = 1e-15;
  CHECK_THROWS_AS(integrate_semiflow(m, Eigen::VectorXd::Ones(1), 10.0, tiny),
                  NumericError);
}

TEST_CASE("spectral data") {
  const SpectralData s = spectral_at_origin(ou2());
  CHECK(s.alpha1 == doctest::Approx(1.0));
  CHECK(s.multiplicity == 1);
  CHECK(std::abs(std::abs(s.eigvecs(0, 0)) - 1.0) < 1e-12);

  const PotentialModel iso = PotentialModel::quadratic(Eigen::Matrix2d::Identity());
  const SpectralData deg = spectral_at_origin(iso);
  CHECK(deg.alpha1 == doctest::Approx(1.0));
  CHECK(deg.multiplicity == 2);

  // Random SPD 3x3 against the characteristic-polynomial oracle.
  Eigen::Matrix3d g;
  g << 1.7, 0.3, -0.2, 0.3, 2.4, 0.5, -0.2, 0.5, 1.2;
  const PotentialModel m3 = PotentialModel::quadratic(g);
  const SpectralData s3 = spectral_at_origin(m3);
  Eigen::Vector3d ev = oracles::sym3x3_eigenvalues(g);
  std::sort(ev.data(), ev.data() + 3);
  CHECK(std::abs(s3.alpha1 - ev(0)) < 1e-10);
}

TEST_CASE("asymptotic direction, quadratic potential") {
  const PotentialModel m = ou2();
  const SpectralData s = spectral_at_origin(m);

  const AsymptoticDirection v = asymptotic_direction(m, vec2(3.0, 5.0), s);
  REQUIRE(v.converged);
  CHECK_FALSE(v.near_zero);
  CHECK(std::abs(v.v(0) - 3.0) < 1e-6);
  CHECK(std::abs(v.v(1)) < 1e-6);
  CHECK((v.v - s.project(v.v)).norm() <= v.residual + 1e-12);

  // x0 orthogonal to V1 is the exceptional set.
  const AsymptoticDirection exc = asymptotic_direction(m, vec2(0.0, 5.0), s);
  CHECK(exc.near_zero);
}

TEST_CASE("asymptotic direction, quartic potential with Richardson check") {
  const PotentialModel m = PotentialModel::quartic_1d(1.0, 1.0);
  const SpectralData s = spectral_at_origin(m);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);

  DirectionControl ctrl;
  const AsymptoticDirection v = asymptotic_direction(m, x0, s, ctrl);
  REQUIRE(v.converged);
  CHECK(v.v.norm() > 0.0);
  CHECK(v.v.norm() <= 1.0);
  // Closed form for psi' = -psi - psi^3: |v| = x0 / sqrt(1 + x0^2).
  CHECK(v.v(0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-5));

  DirectionControl longer = ctrl;
  longer.t_max = 40.0;
  const AsymptoticDirection v2 = asymptotic_direction(m, x0, s, longer);
  CHECK(std::abs(v2.v(0) - v.v(0)) <= 2.0 * ctrl.tol + 1e-9);

  // Halved integrator step moves the estimate by at most 2 tol.
  DirectionControl halved = ctrl;
  halved.h = 0.002;
  const AsymptoticDirection v3 = asymptotic_direction(m, x0, s, halved);
  REQUIRE(v3.converged);
  CHECK(std::abs(v3.v(0) - v.v(0)) <= 2.0 * ctrl.tol + 1e-9);
}

TEST_CASE("lyapunov frozen 1D closed form and fixed point") {
  const PotentialModel m =
      PotentialModel::ou_diagonal(Eigen::VectorXd::Constant(1, 1.5));
  const double eps = 1e-2;
  const LyapunovSolution sol =
      integrate_lyapunov(m, eps, 8.0, LyapunovMode::Frozen);
  for (int k = 0; k < sol.times.size(); ++k) {
    const double t = sol.times(k);
    const double expected = eps * (1.0 - std::exp(-3.0 * t)) / 3.0;
    CHECK(std::abs(sol.matrices[k](0, 0) - expected) < 1e-9);
  }

  const Eigen::MatrixXd fp = Eigen::MatrixXd::Constant(1, 1, eps / 3.0);
  const LyapunovSolution pinned = integrate_lyapunov(
      m, eps, 5.0, LyapunovMode::Frozen, std::nullopt, {}, fp);
  for (const auto& mat : pinned.matrices)
    CHECK(std::abs(mat(0, 0) - eps / 3.0) < 1e-12);
}

TEST_CASE("lyapunov along-flow matches frozen for quadratic potentials") {
  const PotentialModel m = ou2();
  const double eps = 1e-3;
  const Eigen::VectorXd x0 = vec2(1.0, 1.0);
  const LyapunovSolution frozen =
      integrate_lyapunov(m, eps, 10.0, LyapunovMode::Frozen);
  const LyapunovSolution along =
      integrate_lyapunov(m, eps, 10.0, LyapunovMode::AlongFlow, x0);
  REQUIRE(frozen.times.size() == along.times.size());
  for (int k = 0; k < frozen.times.size(); ++k)
    CHECK((frozen.matrices[k] - along.matrices[k]).cwiseAbs().maxCoeff() < 1e-10);

  // Terminal matrix: (eps/2) diag(1, 1/2) for rates (1, 2).
  const Eigen::MatrixXd terminal = along.terminal();
  CHECK(std::abs(terminal(0, 0) - 5e-4) < 1e-8);
  CHECK(std::abs(terminal(1, 1) - 2.5e-4) < 1e-8);
  CHECK(std::abs(terminal(0, 1)) < 1e-10);
}

TEST_CASE("lyapunov sampler tracks the dense solution") {
  const PotentialModel m = PotentialModel::quartic_1d(1.0, 1.0);
  const double eps = 1e-2;
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
  LyapunovSampler sampler(m, eps, x0);
  const LyapunovSolution dense =
      integrate_lyapunov(m, eps, 6.0, LyapunovMode::AlongFlow, x0);
  sampler.advance_to(6.0);
  CHECK(std::abs(sampler.covariance()(0, 0) - dense.terminal()(0, 0)) < 1e-10);
}

TEST_CASE("rotating frame identity") {
  Eigen::VectorXd grid(41);
  for (int i = 0; i <= 40; ++i) grid(i) = 0.5 * i;
  const Eigen::Vector2d x0(1.0, 0.0);
  const RotatingFrameResult rot = rotating_frame_semiflow(1.0, 1.0, x0, grid);

  // Deviation of e^{at} Rot(-bt) psi(t) from x0 stays tiny on [0, 20].
  CHECK(rot.max_deviation <= 1e-10);
  // The sines-on-the-diagonal variant does not satisfy the identity.
  CHECK(rot.max_deviation_sin_diag > 0.5);

  // psi(pi) against the matrix-exponential oracle.
  Eigen::Matrix2d a;
  a << 1.0, 1.0, -1.0, 1.0;
  Eigen::VectorXd tpi(2);
  tpi << 0.0, M_PI;
  const RotatingFrameResult at_pi = rotating_frame_semiflow(1.0, 1.0, x0, tpi);
  const Eigen::Vector2d oracle = oracles::expm((-M_PI * a).eval()) * x0;
  CHECK((at_pi.flow.states[1] - oracle).norm() < 1e-9);
  CHECK(at_pi.flow.states[1](0) == doctest::Approx(-std::exp(-M_PI)).epsilon(1e-8));
  CHECK(std::abs(at_pi.flow.states[1](1)) < 1e-9);
}

TEST_CASE("rotating frame reduces to OU for b = 0") {
  Eigen::VectorXd grid(21);
  for (int i = 0; i <= 20; ++i) grid(i) = 0.25 * i;
  const Eigen::Vector2d x0(0.7, -0.4);
  const RotatingFrameResult rot = rotating_frame_semiflow(1.3, 0.0, x0, grid);
  for (int k = 0; k < grid.size(); ++k) {
    const Eigen::Vector2d expected = std::exp(-1.3 * grid(k)) * x0;
    CHECK((rot.flow.states[k] - expected).norm() < 1e-10);
    CHECK((rot.frame_corrected[k] - x0).norm() < 1e-10);
  }
}

TEST_SUITE_END();
