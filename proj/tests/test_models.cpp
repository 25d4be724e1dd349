#include <doctest.h>

#include <cmath>

#include "cutoff/models.hpp"
#include "cutoff/rng.hpp"
#include "oracles.hpp"

using namespace cutoff;

TEST_SUITE_BEGIN("models");

TEST_CASE("ou-diagonal at the origin") {
  Eigen::VectorXd rates(2);
  rates << 1.0, 2.0;
  const PotentialModel m = PotentialModel::ou_diagonal(rates);
  const ModelEval e = m.evaluate(Eigen::VectorXd::Zero(2));
  CHECK(e.value == 0.0);
  CHECK(e.grad.norm() == 0.0);
  CHECK(e.hess(0, 0) == 1.0);
  CHECK(e.hess(1, 1) == 2.0);
  CHECK(e.hess(0, 1) == 0.0);
  CHECK(m.declared_delta() == 1.0);
  CHECK(*m.declared_Delta() == 2.0);
}

TEST_CASE("quadratic gradient and hessian vs finite differences") {
  Eigen::Matrix3d a;
  a << 2.0, 0.3, -0.1, 0.3, 1.5, 0.2, -0.1, 0.2, 1.1;
  const PotentialModel m = PotentialModel::quadratic(a);
  RandomStream rs(5, 0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x(i) = 2.0 * (rs.uniform() - 0.5);
    const ModelEval e = m.evaluate(x);
    auto f = [&](const Eigen::VectorXd& z) { return m.evaluate(z).value; };
    CHECK((e.grad - oracles::fd_gradient(f, x)).norm() < 1e-7);
    CHECK((e.hess - oracles::fd_hessian(f, x)).norm() < 1e-5);
    CHECK(e.value == doctest::Approx(0.5 * x.dot(a * x)).epsilon(1e-12));
  }
}

TEST_CASE("quartic-1d closed values") {
  const PotentialModel m = PotentialModel::quartic_1d(1.0, 1.0);
  const ModelEval e = m.evaluate(Eigen::VectorXd::Constant(1, 2.0));
  CHECK(e.value == doctest::Approx(6.0));
  CHECK(e.grad(0) == doctest::Approx(10.0));
  CHECK(e.hess(0, 0) == doctest::Approx(13.0));

  auto f = [&](const Eigen::VectorXd& z) { return m.evaluate(z).value; };
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.7);
  CHECK(std::abs(m.evaluate(x).grad(0) - oracles::fd_gradient(f, x)(0)) < 1e-8);
}

TEST_CASE("custom polynomial evaluation") {
  Eigen::VectorXd coeffs(5);
  coeffs << 0.0, 0.0, 0.5, 0.1, 0.25;  // x^2/2 + x^3/10 + x^4/4
  const PotentialModel m = PotentialModel::custom_poly_1d(coeffs, 0.5);
  auto f = [&](const Eigen::VectorXd& z) { return m.evaluate(z).value; };
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.3);
  CHECK(std::abs(m.evaluate(x).grad(0) - oracles::fd_gradient(f, x)(0)) < 1e-7);
  CHECK(std::abs(m.evaluate(x).hess(0, 0) - oracles::fd_hessian(f, x)(0, 0)) < 1e-4);

  Eigen::VectorXd bad(3);
  bad << 0.1, 0.0, 1.0;
  CHECK_THROWS_AS(PotentialModel::custom_poly_1d(bad, 1.0), ConfigError);
}

TEST_CASE("coercivity sampling") {
  Eigen::VectorXd rates(2);
  rates << 1.0, 2.0;
  const PotentialModel ou = PotentialModel::ou_diagonal(rates);
  const CoercivityReport pass = check_coercivity(ou, {10.0, 200, 3}, 1.0, 2.0);
  CHECK(pass.passed);

  // Quartic Hessian is unbounded above: Delta = 13 must fail by radius 10.
  const PotentialModel quartic = PotentialModel::quartic_1d(1.0, 1.0);
  const CoercivityReport fail = check_coercivity(quartic, {10.0, 400, 3}, 1.0, 13.0);
  CHECK_FALSE(fail.passed);
  CHECK_FALSE(fail.failure.empty());
  CHECK(fail.witness_x.size() == 1);

  CHECK_THROWS_AS(check_coercivity(ou, {1.0, 0, 1}, 1.0, std::nullopt), ConfigError);
}

TEST_CASE("truncated model agrees with base inside the ball") {
  const PotentialModel base = PotentialModel::quartic_1d(1.0, 1.0);
  const PotentialModel trunc = build_truncated_model(base, 2.0);
  for (double x = -2.0 + 1e-9; x <= 2.0 - 1e-9; x += 0.1) {
    CHECK(trunc.value_1d(x) == base.value_1d(x));
    CHECK(trunc.grad_1d(x) == base.grad_1d(x));
    CHECK(trunc.hess_1d(x) == base.hess_1d(x));
  }
}

TEST_CASE("truncated model tail and seams") {
  const PotentialModel base = PotentialModel::quartic_1d(1.0, 1.0);
  const PotentialModel trunc = build_truncated_model(base, 2.0);

  // Constant Hessian beyond M+1, equal to the blend target V''(M).
  CHECK(trunc.hess_1d(10.0) == doctest::Approx(base.hess_1d(2.0)));
  CHECK(trunc.hess_1d(-10.0) == doctest::Approx(base.hess_1d(-2.0)));
  CHECK(trunc.hess_1d(4.0) == trunc.hess_1d(10.0));

  // C1 continuity across both seams by central differences.
  auto check_c1 = [&](double seam) {
    const double h = 1e-6;
    const double grad_fd =
        (trunc.value_1d(seam + h) - trunc.value_1d(seam - h)) / (2.0 * h);
    CHECK(grad_fd == doctest::Approx(trunc.grad_1d(seam)).epsilon(1e-5));
    const double hess_fd =
        (trunc.grad_1d(seam + h) - trunc.grad_1d(seam - h)) / (2.0 * h);
    CHECK(hess_fd == doctest::Approx(trunc.hess_1d(seam)).epsilon(1e-4));
  };
  check_c1(2.0);
  check_c1(3.0);
  check_c1(-2.0);
  check_c1(-3.0);

  // Declared Delta is finite and the sampled coercivity check passes.
  REQUIRE(trunc.declared_Delta().has_value());
  const CoercivityReport rep =
      check_coercivity(trunc, {10.0, 500, 11}, trunc.declared_delta(),
                       *trunc.declared_Delta() * (1.0 + 1e-9));
  CHECK(rep.passed);
}

TEST_CASE("truncation rejects bases that dip below delta") {
  // V'' = 1 - 2x + 12 x^2 dips to ~0.917 inside |x| <= 2.
  Eigen::VectorXd coeffs(5);
  coeffs << 0.0, 0.0, 0.5, -1.0 / 3.0, 1.0;
  const PotentialModel base = PotentialModel::custom_poly_1d(coeffs, 1.0);
  CHECK_THROWS_AS(build_truncated_model(base, 2.0), ConfigError);
}

TEST_CASE("vector field model validation") {
  Eigen::Matrix2d a;
  a << 2.0, 0.5, 0.5, 1.0;
  const VectorFieldModel lin = VectorFieldModel::linear(a);
  CHECK(lin.field(Eigen::VectorXd::Ones(2)).isApprox(a * Eigen::VectorXd::Ones(2)));

  CHECK_THROWS_AS(
      VectorFieldModel(2,
                       [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
                         return x + Eigen::VectorXd::Ones(2);
                       },
                       [](const Eigen::VectorXd&) {
                         return Eigen::MatrixXd::Identity(2, 2);
                       },
                       1.0, "bad-f0"),
      ConfigError);

  CHECK_THROWS_AS(
      VectorFieldModel(2,
                       [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x; },
                       [](const Eigen::VectorXd&) {
                         Eigen::MatrixXd j(2, 2);
                         j << 1.0, 0.5, -0.5, 1.0;
                         return j;
                       },
                       1.0, "bad-jacobian"),
      ConfigError);
}

TEST_SUITE_END();
