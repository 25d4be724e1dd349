#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cutoff/experiments.hpp"
#include "cutoff/runner.hpp"
#include "oracles.hpp"

using namespace cutoff;

namespace {

PotentialModel ou1(double rate = 1.0) {
  return PotentialModel::ou_diagonal(Eigen::VectorXd::Constant(1, rate));
}

Eigen::VectorXd x0_1d(double v = 1.0) { return Eigen::VectorXd::Constant(1, v); }

std::vector<double> crange(double lo, double hi, double step) {
  std::vector<double> cs;
  for (double c = lo; c <= hi + 1e-12; c += step) cs.push_back(c);
  return cs;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("experiments");

TEST_CASE("cutoff schedule formulas") {
  const SpectralData s1 = spectral_at_origin(ou1(1.0));
  const CutoffSchedule lin =
      cutoff_schedule(s1, std::exp(-10.0), ScheduleVariant::Linearized);
  CHECK(lin.t_eps == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(lin.w_eps == doctest::Approx(1.0).epsilon(1e-12));

  const SpectralData s2 = spectral_at_origin(ou1(2.0));
  const CutoffSchedule nl =
      cutoff_schedule(s2, 1e-4, ScheduleVariant::Nonlinear);
  CHECK(nl.t_eps == doctest::Approx(2.302585092994046).epsilon(1e-12));
  CHECK(nl.delta_eps == doctest::Approx(0.5623413251903491).epsilon(1e-12));
  CHECK(nl.w_eps == doctest::Approx(0.5 + 0.5623413251903491).epsilon(1e-12));

  // t_eps -> 0 as eps -> 1.
  const CutoffSchedule tiny =
      cutoff_schedule(s1, 1.0 - 1e-12, ScheduleVariant::Linearized);
  CHECK(tiny.t_eps > 0.0);
  CHECK(tiny.t_eps < 1e-11);

  CHECK_THROWS_AS(cutoff_schedule(s1, 1.0, ScheduleVariant::Linearized), ConfigError);
  CHECK_THROWS_AS(cutoff_schedule(s1, 1e-3, ScheduleVariant::Linearized, 0.5),
                  ConfigError);

  // Window algebra: t_eps(b) + b delta equals t_eps + b (1/alpha + delta).
  const double b = 1.7;
  const double lhs = nl.t_star(b);
  const double rhs = nl.t_eps + b * (1.0 / nl.alpha1 + nl.delta_eps);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-15));
}

TEST_CASE("profile function values and limits") {
  const PotentialModel m = ou1(1.0);
  const SpectralData s = spectral_at_origin(m);
  const AsymptoticDirection v = asymptotic_direction(m, x0_1d(), s);

  CHECK(profile_G(s, v, 0.0) == doctest::Approx(0.5204998778130465).epsilon(1e-8));
  CHECK(profile_G(s, v, 40.0) <= 1e-9);
  CHECK(profile_G(s, v, -5.0) >= 1.0 - 1e-6);

  // Strict decrease away from the erf saturation plateaus, monotone
  // non-increase across the whole grid.
  double prev = 2.0;
  for (double b = -10.0; b <= 10.0; b += 0.5) {
    const double g = profile_G(s, v, b);
    if (prev < 1.0 - 1e-12 && g > 1e-12) CHECK(g < prev);
    CHECK(g <= prev);
    prev = g;
  }
  CHECK(profile_G(s, v, -10.0) >= 1.0 - 1e-4);
  CHECK(profile_G(s, v, 10.0) <= 1e-4);

  // Exceptional initial condition: x0 orthogonal to V1.
  Eigen::VectorXd rates(2);
  rates << 1.0, 2.0;
  const PotentialModel m2 = PotentialModel::ou_diagonal(rates);
  const SpectralData s2 = spectral_at_origin(m2);
  Eigen::VectorXd x0(2);
  x0 << 0.0, 5.0;
  const AsymptoticDirection exc = asymptotic_direction(m2, x0, s2);
  CHECK_THROWS_AS(profile_G(s2, exc, 0.0), ConfigError);
}

TEST_CASE("profile limits for a 2D quadratic scenario") {
  Eigen::VectorXd rates(2);
  rates << 1.0, 2.0;
  const PotentialModel m = PotentialModel::ou_diagonal(rates);
  const SpectralData s = spectral_at_origin(m);
  Eigen::VectorXd x0(2);
  x0 << 3.0, 5.0;
  const AsymptoticDirection v = asymptotic_direction(m, x0, s);
  CHECK(profile_G(s, v, -10.0) >= 1.0 - 1e-4);
  CHECK(profile_G(s, v, 10.0) <= 1e-4);
}

TEST_CASE("linearized curve approaches the profile") {
  const PotentialModel m = ou1(1.0);
  const SpectralData s = spectral_at_origin(m);
  const AsymptoticDirection v = asymptotic_direction(m, x0_1d(), s);
  const auto cs = crange(-2.0, 2.0, 0.5);

  const ProfileCurve curve = linearized_distance_curve(m, 1e-6, x0_1d(), cs);
  REQUIRE(curve.points.size() == cs.size());
  double max_gap = 0.0;
  for (const auto& p : curve.points)
    max_gap = std::max(max_gap, std::abs(p.distance - profile_G(s, v, p.c)));
  CHECK(max_gap <= 0.01);

  // Post-cutoff regime.
  const ProfileCurve far = linearized_distance_curve(m, 1e-6, x0_1d(), {20.0});
  CHECK(far.points.front().distance <= 1e-6);
}

TEST_CASE("linearized curve skips non-positive times") {
  const PotentialModel m = ou1(1.0);
  const ProfileCurve curve =
      linearized_distance_curve(m, 0.5, x0_1d(), {-3.0, 0.0, 1.0});
  CHECK(curve.skipped.size() == 1);
  CHECK(curve.skipped.front().c == -3.0);
  CHECK(curve.points.size() == 2);
}

TEST_CASE("fokker-planck curve matches the exact one for OU") {
  const PotentialModel m = ou1(1.0);
  const double eps = 1e-4;
  const auto cs = crange(-1.0, 1.0, 0.5);
  CurveControls ctrl;
  ctrl.fp_cells = 4096;  // the 2e-3 agreement target needs h ~ 0.04 sigma
  const ProfileCurve fp = nonlinear_distance_curve(m, eps, x0_1d(), cs,
                                                   NonlinearMethod::FokkerPlanck, ctrl);
  REQUIRE(fp.points.size() == cs.size());
  for (const auto& p : fp.points) {
    const double exact = linearized_distance_at(m, eps, x0_1d(), p.t);
    CHECK(std::abs(p.distance - exact) <= 2e-3);
  }
}

TEST_CASE("pre-cutoff fokker-planck distance saturates") {
  const PotentialModel m = ou1(1.0);
  const ProfileCurve fp = nonlinear_distance_curve(
      m, 1e-6, x0_1d(), {-3.0}, NonlinearMethod::FokkerPlanck);
  REQUIRE(fp.points.size() == 1);
  CHECK(fp.points.front().distance >= 0.95);
}

TEST_CASE("kde curve agrees with the exact law for OU") {
  const PotentialModel m = ou1(1.0);
  const double eps = 1e-3;
  CurveControls ctrl;
  ctrl.kde_paths = 100000;
  ctrl.kde_grid_cells = 512;
  ctrl.kde_bootstrap = 8;
  ctrl.seed = 5;
  ctrl.n_workers = 2;
  const ProfileCurve kde = nonlinear_distance_curve(m, eps, x0_1d(), {0.0, 1.0},
                                                    NonlinearMethod::Kde, ctrl);
  REQUIRE(kde.points.size() == 2);
  for (const auto& p : kde.points) {
    const double exact = linearized_distance_at(m, eps, x0_1d(), p.t);
    CHECK(std::abs(p.distance - exact) <= 0.05);
    CHECK(p.std_error > 0.0);
    CHECK(p.std_error < 0.05);
  }
  CurveControls too_few;
  too_few.kde_paths = 5000;
  CHECK_THROWS_AS(nonlinear_distance_curve(m, eps, x0_1d(), {0.0},
                                           NonlinearMethod::Kde, too_few),
                  ConfigError);
}

TEST_CASE("truncation comparison") {
  const PotentialModel base = PotentialModel::quartic_1d(1.0, 1.0);

  // Truncation far outside the stationary mass is invisible.
  const TruncationReport huge =
      truncation_comparison(base, {50.0}, 1e-3, 1.0, 0.0, 200, 3);
  CHECK(huge.rows.front().stationary_tv <= 1e-10);

  // Stationary-TV monotonicity needs an epsilon large enough that the
  // Gibbs mass beyond M does not underflow entirely.
  const TruncationReport wide =
      truncation_comparison(base, {2.0, 3.0, 5.0}, 0.8, 1.0, 0.0, 1000, 3);
  REQUIRE(wide.rows.size() == 3);
  CHECK(wide.rows[0].stationary_tv > wide.rows[1].stationary_tv);
  CHECK(wide.rows[1].stationary_tv > wide.rows[2].stationary_tv);
  CHECK(wide.rows[2].stationary_tv > 0.0);
  for (const auto& row : wide.rows)
    CHECK(row.exit_probability <= row.exit_bound + 1e-12);

  // Small-noise regime: exits are ~90 sigma events, the bound is loose.
  const TruncationReport rep =
      truncation_comparison(base, {3.0, 5.0}, 1e-3, 1.0, 0.0, 1000, 3);
  for (const auto& row : rep.rows) {
    CHECK(row.exit_probability <= row.exit_bound + 1e-12);
    CHECK(row.exits == 0);
  }

  CHECK_THROWS_AS(truncation_comparison(base, {0.5}, 1e-3, 1.0), ConfigError);
}

TEST_CASE("rotating frame curve") {
  const Eigen::Vector2d x0(1.0, 0.0);
  const auto cs = crange(-2.0, 2.0, 1.0);

  // b = 0 reduces to the 2D OU linearized curve with rate a.
  const ProfileCurve rot = rotating_frame_curve(1.0, 0.0, x0, 1e-5, cs);
  Eigen::VectorXd rates(2);
  rates << 1.0, 1.0;
  const PotentialModel iso = PotentialModel::ou_diagonal(rates);
  Eigen::VectorXd x0v(2);
  x0v << 1.0, 0.0;
  const ProfileCurve lin = linearized_distance_curve(iso, 1e-5, x0v, cs);
  REQUIRE(rot.points.size() == lin.points.size());
  for (std::size_t i = 0; i < rot.points.size(); ++i)
    CHECK(std::abs(rot.points[i].distance - lin.points[i].distance) <= 1e-7);

  // Profile match at small epsilon.
  const ProfileCurve tight = rotating_frame_curve(1.0, 1.0, x0, 1e-6, cs);
  for (const auto& p : tight.points)
    CHECK(std::abs(p.distance - rotating_profile_G(1.0, x0, p.c)) <= 0.02);

  CHECK_THROWS_AS(rotating_frame_curve(-1.0, 0.0, x0, 1e-3, cs), ConfigError);
}

TEST_CASE("cutoff verdict for the OU family") {
  const CutoffVerdict v = cutoff_verdict(ou1(1.0), 1e-7, x0_1d());
  CHECK(v.distance_pre >= 0.9);
  CHECK(v.distance_post <= 0.1);
  CHECK(v.holds);
}

TEST_CASE("config parsing is strict") {
  const std::string good = R"({
    "model": {"kind": "ou-diagonal", "rates": [1.0]},
    "x0": [1.0],
    "epsilons": [1e-3],
    "c_grid": {"min": -1.0, "max": 1.0, "step": 1.0},
    "seed": 7,
    "tasks": ["profile"],
    "output_dir": "/tmp/cutoff_cfg_test"
  })";
  const ExperimentConfig cfg = parse_experiment_config(good);
  CHECK(cfg.model.dim() == 1);
  CHECK(cfg.c_grid.size() == 3);
  CHECK(cfg.seed == 7);

  CHECK_THROWS_AS(parse_experiment_config(R"({"model": {"kind": "ou-diagonal",
    "rates": [1.0]}, "unknown_key": 1})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"model": {"kind": "nope"}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"model": {"kind": "ou-diagonal",
    "rates": [1.0]}, "epsilons": [2.0]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("not json"), ConfigError);

  const PotentialModel trunc = parse_model_json(R"({"kind": "truncated",
    "base": {"kind": "quartic-1d", "a": 1.0, "beta": 1.0}, "M": 2.0})");
  CHECK(trunc.kind() == PotentialModel::Kind::Truncated1d);
}

TEST_CASE("run_experiment is reproducible across worker counts") {
  namespace fs = std::filesystem;
  const std::string dir1 = "/tmp/cutoff_run_w1";
  const std::string dir2 = "/tmp/cutoff_run_w2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  const std::string tmpl = R"({
    "model": {"kind": "ou-diagonal", "rates": [1.0]},
    "x0": [1.0],
    "epsilons": [1e-3, 1e-4],
    "c_grid": {"min": -1.0, "max": 1.0, "step": 0.5},
    "seed": 11,
    "workers": %d,
    "tasks": ["profile", "moments", "lemmas"],
    "moments": {"t_end": 1.0, "paths": 400},
    "lemmas": {"cases": 4},
    "output_dir": "%s"
  })";
  char buf[1024];
  std::snprintf(buf, sizeof(buf), tmpl.c_str(), 1, dir1.c_str());
  const RunManifest m1 = run_experiment(parse_experiment_config(buf));
  std::snprintf(buf, sizeof(buf), tmpl.c_str(), 2, dir2.c_str());
  const RunManifest m2 = run_experiment(parse_experiment_config(buf));

  REQUIRE(m1.all_ok());
  REQUIRE(m2.all_ok());
  for (const std::string name :
       {"profile.csv", "moments_0.csv", "moments_1.csv", "lemmas.csv"}) {
    const std::string a = slurp(dir1 + "/" + name);
    const std::string b = slurp(dir2 + "/" + name);
    CHECK(a == b);
    CHECK(!a.empty());
  }

  // Headers are part of the interface contract.
  CHECK(slurp(dir1 + "/profile.csv").rfind("epsilon,c,t,distance,stderr,G", 0) == 0);
  CHECK(slurp(dir1 + "/moments_0.csv").rfind("t,n,estimate,stderr,bound,pass", 0) == 0);

  // Re-running the same config reproduces identical bytes.
  fs::remove_all(dir2);
  const RunManifest m3 = run_experiment(parse_experiment_config(buf));
  REQUIRE(m3.all_ok());
  CHECK(slurp(dir1 + "/profile.csv") == slurp(dir2 + "/profile.csv"));

  // Empty task list: a manifest with zero outputs.
  const std::string empty_cfg = R"({
    "model": {"kind": "ou-diagonal", "rates": [1.0]},
    "x0": [1.0],
    "output_dir": "/tmp/cutoff_run_empty"
  })";
  const RunManifest m4 = run_experiment(parse_experiment_config(empty_cfg));
  CHECK(m4.tasks.empty());
  CHECK(fs::exists("/tmp/cutoff_run_empty/manifest.json"));

  fs::remove_all(dir1);
  fs::remove_all(dir2);
  fs::remove_all("/tmp/cutoff_run_empty");
}

TEST_CASE("failed tasks are reported, not thrown") {
  const std::string cfg = R"({
    "model": {"kind": "quadratic", "matrix": [[1.0, 0.0], [0.0, 2.0]]},
    "x0": [1.0, 1.0],
    "epsilons": [1e-3],
    "tasks": ["curve-fp"],
    "output_dir": "/tmp/cutoff_run_fail"
  })";
  const RunManifest m = run_experiment(parse_experiment_config(cfg));
  REQUIRE(m.tasks.size() == 1);
  CHECK_FALSE(m.tasks[0].ok);  // fokker-planck requires 1D
  CHECK(!m.tasks[0].message.empty());
  std::filesystem::remove_all("/tmp/cutoff_run_fail");
}


TEST_CASE("linearized distances converge monotonically to the profile") {
  const PotentialModel m = ou1(1.0);
  const SpectralData s = spectral_at_origin(m);
  const AsymptoticDirection v = asymptotic_direction(m, x0_1d(), s);
  const double g0 = profile_G(s, v, 0.0);

  // Fixed c = 0: the gap to G(0) shrinks monotonically through the
  // epsilon sequence.
  double prev_gap = 1.0;
  double prev_sup = 1.0;
  const auto cs = crange(-3.0, 3.0, 0.5);
  for (const double eps : {1e-3, 1e-5, 1e-7}) {
    const double d0 = linearized_distance_at(
        m, eps, x0_1d(), cutoff_schedule(s, eps, ScheduleVariant::Linearized).t_eps);
    const double gap = std::abs(d0 - g0);
    CHECK(gap < prev_gap);
    prev_gap = gap;

    const ProfileCurve curve = linearized_distance_curve(m, eps, x0_1d(), cs);
    double sup = 0.0;
    for (const auto& p : curve.points)
      sup = std::max(sup, std::abs(p.distance - profile_G(s, v, p.c)));
    CHECK(sup < prev_sup);
    prev_sup = sup;
  }
}

TEST_SUITE_END();

