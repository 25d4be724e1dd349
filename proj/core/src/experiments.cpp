#include "cutoff/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "cutoff/rng.hpp"

namespace cutoff {

CutoffSchedule cutoff_schedule(const SpectralData& spectral, double epsilon,
                               ScheduleVariant variant, double gamma) {
  if (!(epsilon > 0.0) || epsilon >= 1.0)
    throw ConfigError("cutoff_schedule: schedule undefined for epsilon outside (0,1)");
  if (!(gamma > 0.0) || gamma > 0.25)
    throw ConfigError("cutoff_schedule: gamma must lie in (0, 1/4]");
  CutoffSchedule s;
  s.epsilon = epsilon;
  s.gamma = gamma;
  s.alpha1 = spectral.alpha1;
  s.variant = variant;
  s.delta_eps = std::pow(epsilon, gamma);
  s.t_eps = std::log(1.0 / epsilon) / (2.0 * spectral.alpha1);
  s.w_eps = 1.0 / spectral.alpha1 +
            (variant == ScheduleVariant::Nonlinear ? s.delta_eps : 0.0);
  return s;
}

double profile_G(const SpectralData& spectral, const AsymptoticDirection& v,
                 double b) {
  if (!v.converged)
    throw NumericError("profile_G: asymptotic direction did not converge");
  if (v.near_zero)
    throw ConfigError(
        "profile_G: v(x0) numerically zero (exceptional initial condition, "
        "profile undefined)");
  const Eigen::VectorXd mean =
      std::sqrt(2.0) * std::exp(-b) * (spectral.hess0.sqrt() * v.v);
  return tv_identity_cov(mean);
}

namespace {

GaussianDist stationary_gaussian(const SpdMatrix& hess0, double epsilon) {
  const Eigen::MatrixXd cov = (epsilon / 2.0) * hess0.inverse();
  return GaussianDist(Eigen::VectorXd::Zero(hess0.dim()),
                      SpdMatrix((cov + cov.transpose()) / 2.0));
}

}  // namespace

ProfileCurve linearized_distance_curve(const PotentialModel& model, double epsilon,
                                       const Eigen::VectorXd& x0,
                                       const std::vector<double>& c_grid,
                                       const CurveControls& ctrl) {
  if (model.dim() > 3)
    throw ConfigError("linearized_distance_curve: dims 1..3 only");
  const SpectralData spectral = spectral_at_origin(model);
  const CutoffSchedule sched =
      cutoff_schedule(spectral, epsilon, ScheduleVariant::Linearized);
  const GaussianDist target = stationary_gaussian(spectral.hess0, epsilon);

  std::vector<double> cs = c_grid;
  std::sort(cs.begin(), cs.end());

  ProfileCurve curve;
  curve.kind = ProfileCurve::Kind::ExactLinearized;
  curve.epsilon = epsilon;

  LyapunovSampler sampler(model, epsilon, x0, ctrl.semiflow_step);
  for (double c : cs) {
    const double t = sched.t_star(c);
    if (t <= 0.0) {
      curve.skipped.push_back({c, "t_eps + c w_eps <= 0"});
      continue;
    }
    sampler.advance_to(t);
    const Eigen::MatrixXd cov = sampler.covariance();
    const GaussianDist law(sampler.state(),
                           SpdMatrix((cov + cov.transpose()) / 2.0));
    CurvePoint pt;
    pt.c = c;
    pt.t = t;
    pt.distance = tv_general(law, target, ctrl.quadrature);
    curve.points.push_back(pt);
  }
  return curve;
}

double linearized_distance_at(const PotentialModel& model, double epsilon,
                              const Eigen::VectorXd& x0, double t,
                              const CurveControls& ctrl) {
  if (!(t > 0.0)) throw ConfigError("linearized_distance_at: t must be positive");
  const SpectralData spectral = spectral_at_origin(model);
  const GaussianDist target = stationary_gaussian(spectral.hess0, epsilon);
  LyapunovSampler sampler(model, epsilon, x0, ctrl.semiflow_step);
  sampler.advance_to(t);
  const Eigen::MatrixXd cov = sampler.covariance();
  const GaussianDist law(sampler.state(), SpdMatrix((cov + cov.transpose()) / 2.0));
  return tv_general(law, target, ctrl.quadrature);
}

namespace {

ProfileCurve fp_curve(const PotentialModel& model, double epsilon,
                      const Eigen::VectorXd& x0, const std::vector<double>& cs,
                      const CutoffSchedule& sched, const CurveControls& ctrl) {
  ProfileCurve curve;
  curve.kind = ProfileCurve::Kind::FokkerPlanck;
  curve.epsilon = epsilon;

  std::vector<double> times;
  std::vector<double> kept_c;
  for (double c : cs) {
    const double t = sched.t_star(c);
    if (t <= 0.0) {
      curve.skipped.push_back({c, "t_eps + c w_eps <= 0"});
      continue;
    }
    times.push_back(t);
    kept_c.push_back(c);
  }
  if (times.empty()) return curve;

  // Shared grid for the transient law and the stationary density. The
  // wings only need the stationary tail plus headroom for the initial
  // one-cell peak; anything wider just inflates the cell size.
  const double sigma = std::sqrt(epsilon / (2.0 * model.hess_1d(0.0)));
  AxisSpec ax;
  {
    const double wing = std::max(12.0 * sigma, 0.02 * (std::abs(x0(0)) + 1.0));
    ax.lo = std::min(0.0, x0(0)) - wing;
    ax.hi = std::max(0.0, x0(0)) + wing;
    ax.n_cells = ctrl.fp_cells;
  }
  GridSpec gs;
  gs.cells = ctrl.fp_cells;
  gs.bounds = std::vector<AxisSpec>{ax};

  const double h = ax.step();
  const double hess_max =
      model.hessian_bound(std::max(std::abs(ax.lo), std::abs(ax.hi)));
  const double dt =
      ctrl.fp_dt_safety * std::min(0.25 * h * h / epsilon, 0.1 / hess_max);

  const FpSolution sol = solve_fokker_planck_1d(model, epsilon, x0(0),
                                                times.back(), gs, dt, times);
  const DensityGrid stat = stationary_density(model, epsilon, gs);

  for (std::size_t i = 0; i < times.size(); ++i) {
    CurvePoint pt;
    pt.c = kept_c[i];
    pt.t = times[i];
    pt.distance = tv_between_grids(sol.densities[i], stat);
    curve.points.push_back(pt);
  }
  return curve;
}

ProfileCurve kde_curve(const PotentialModel& model, double epsilon,
                       const Eigen::VectorXd& x0, const std::vector<double>& cs,
                       const CutoffSchedule& sched, const CurveControls& ctrl) {
  if (ctrl.kde_paths < 100000)
    throw ConfigError("nonlinear_distance_curve: kde requires >= 1e5 paths");
  ProfileCurve curve;
  curve.kind = ProfileCurve::Kind::Kde;
  curve.epsilon = epsilon;
  const int d = model.dim();

  std::vector<double> times;
  std::vector<double> kept_c;
  for (double c : cs) {
    const double t = sched.t_star(c);
    if (t <= 0.0) {
      curve.skipped.push_back({c, "t_eps + c w_eps <= 0"});
      continue;
    }
    times.push_back(t);
    kept_c.push_back(c);
  }
  if (times.empty()) return curve;

  // One simulation sweep; snapshots at the grid indices nearest to each
  // requested time (grid steps are fine, so the snap error is O(h)).
  const TimeGrid grid = make_grid(model, epsilon, times.back(), x0.norm());
  std::vector<int> record;
  for (double t : times)
    record.push_back(std::min<int>(grid.n_steps,
                                   static_cast<int>(std::round(t / grid.step()))));

  const int n_paths = ctrl.kde_paths;
  std::vector<double> snap_x(static_cast<std::size_t>(n_paths) * record.size() * d);
  std::vector<double> snap_y(snap_x.size());
  simulate_coupled_snapshots(model, epsilon, x0, grid, record, n_paths,
                             ctrl.seed, ctrl.n_workers, snap_x, snap_y);

  // Stationary density once; KDE grids must share its axes.
  GridSpec gs;
  gs.cells = ctrl.kde_grid_cells;
  const DensityGrid stat = stationary_density(model, epsilon, gs);
  GridSpec kde_spec;
  kde_spec.cells = ctrl.kde_grid_cells;
  kde_spec.bounds = stat.axes;

  std::vector<Eigen::VectorXd> samples(n_paths, Eigen::VectorXd(d));
  for (std::size_t si = 0; si < times.size(); ++si) {
    for (int p = 0; p < n_paths; ++p) {
      for (int i = 0; i < d; ++i)
        samples[p](i) = snap_x[(static_cast<std::size_t>(p) * record.size() + si) * d + i];
    }
    const DensityGrid kde = kde_density(samples, BandwidthRule::scott(), kde_spec);
    CurvePoint pt;
    pt.c = kept_c[si];
    pt.t = times[si];
    pt.distance = tv_between_grids(kde, stat);

    // Bootstrap standard error over path resampling.
    if (ctrl.kde_bootstrap > 1) {
      RandomStream rs(ctrl.seed, (0xA5ull << 56) + si);
      std::vector<Eigen::VectorXd> resample(n_paths, Eigen::VectorXd(d));
      double mean = 0.0, m2 = 0.0;
      for (int btrap = 0; btrap < ctrl.kde_bootstrap; ++btrap) {
        for (int p = 0; p < n_paths; ++p) {
          const int pick = static_cast<int>(rs.raw() % static_cast<std::uint64_t>(n_paths));
          resample[p] = samples[pick];
        }
        const DensityGrid kde_b = kde_density(resample, BandwidthRule::scott(), kde_spec);
        const double tv_b = tv_between_grids(kde_b, stat);
        const double delta = tv_b - mean;
        mean += delta / (btrap + 1);
        m2 += delta * (tv_b - mean);
      }
      pt.std_error = std::sqrt(m2 / (ctrl.kde_bootstrap - 1.0));
    }
    curve.points.push_back(pt);
  }
  return curve;
}

}  // namespace

ProfileCurve nonlinear_distance_curve(const PotentialModel& model, double epsilon,
                                      const Eigen::VectorXd& x0,
                                      const std::vector<double>& c_grid,
                                      NonlinearMethod method,
                                      const CurveControls& ctrl) {
  const SpectralData spectral = spectral_at_origin(model);
  const CutoffSchedule sched =
      cutoff_schedule(spectral, epsilon, ScheduleVariant::Nonlinear, ctrl.gamma);
  std::vector<double> cs = c_grid;
  std::sort(cs.begin(), cs.end());

  if (method == NonlinearMethod::FokkerPlanck) {
    if (model.dim() != 1)
      throw ConfigError("nonlinear_distance_curve: fokker-planck requires 1D");
    return fp_curve(model, epsilon, x0, cs, sched, ctrl);
  }
  if (model.dim() > 2)
    throw ConfigError("nonlinear_distance_curve: kde requires dim <= 2");
  return kde_curve(model, epsilon, x0, cs, sched, ctrl);
}

TruncationReport truncation_comparison(const PotentialModel& base,
                                       const std::vector<double>& m_list,
                                       double epsilon, double x0, double b,
                                       int n_paths, std::uint64_t seed,
                                       double gamma, int n_workers) {
  if (base.dim() != 1)
    throw ConfigError("truncation_comparison: base must be 1D");
  for (double m : m_list)
    if (m <= std::abs(x0))
      throw ConfigError("truncation_comparison: requires M > |x0| (got M=" +
                        std::to_string(m) + ")");

  const SpectralData spectral = spectral_at_origin(base);
  const CutoffSchedule sched =
      cutoff_schedule(spectral, epsilon, ScheduleVariant::Linearized, gamma);
  // t*_eps(b) = t_eps(b) + b delta_eps.
  const double t_star = sched.t_star(b) + b * std::pow(epsilon, gamma);
  if (!(t_star > 0.0))
    throw ConfigError("truncation_comparison: t* <= 0 for this b and epsilon");

  TruncationReport rep;
  rep.epsilon = epsilon;
  rep.t_star = t_star;

  for (double m : m_list) {
    const PotentialModel trunc = build_truncated_model(base, m);
    TruncationRow row;
    row.M = m;
    row.paths = n_paths;

    // Stationary TV on a common grid covering both the stationary mass
    // and the region beyond M + 1 where the potentials differ.
    {
      const double sigma = std::sqrt(epsilon / (2.0 * base.hess_1d(0.0)));
      AxisSpec ax;
      ax.lo = -std::max(12.0 * sigma, m + 2.0);
      ax.hi = std::max(12.0 * sigma, m + 2.0);
      ax.n_cells = 8192;
      GridSpec gs;
      gs.bounds = std::vector<AxisSpec>{ax};
      const DensityGrid mu_base = stationary_density(base, epsilon, gs);
      const DensityGrid mu_trunc = stationary_density(trunc, epsilon, gs);
      row.stationary_tv = tv_between_grids(mu_base, mu_trunc);
    }

    // Exit probability of the truncated diffusion over [0, t*].
    {
      const TimeGrid grid = make_grid(trunc, epsilon, t_star, std::abs(x0));
      const double h = grid.step();
      const double noise = std::sqrt(epsilon * h);
      std::vector<int> exits(std::max(1, n_workers), 0);
      auto worker = [&](int w, int p_begin, int p_end) {
        for (int p = p_begin; p < p_end; ++p) {
          RandomStream rs(seed, static_cast<std::uint64_t>(p));
          double x = x0;
          bool exited = std::abs(x) > m;
          for (int k = 0; k < grid.n_steps && !exited; ++k) {
            x += -h * trunc.grad_1d(x) + noise * rs.normal();
            if (std::abs(x) > m) exited = true;
          }
          if (exited) ++exits[w];
        }
      };
      if (n_workers <= 1) {
        worker(0, 0, n_paths);
      } else {
        std::vector<std::thread> pool;
        const int chunk = (n_paths + n_workers - 1) / n_workers;
        for (int w = 0; w < n_workers; ++w) {
          const int pb = std::min(w * chunk, n_paths);
          const int pe = std::min(pb + chunk, n_paths);
          pool.emplace_back(worker, w, pb, pe);
        }
        for (auto& t : pool) t.join();
      }
      row.exits = 0;
      for (int e : exits) row.exits += e;
      row.exit_probability = static_cast<double>(row.exits) / n_paths;
      const double c_m = m - std::abs(x0);
      const double denom = c_m * c_m - epsilon * t_star;
      row.exit_bound = denom > 0.0
                           ? 2.0 * epsilon * epsilon * t_star * t_star / (denom * denom)
                           : std::numeric_limits<double>::infinity();
    }
    rep.rows.push_back(row);
  }
  return rep;
}

ProfileCurve rotating_frame_curve(double a, double b_param,
                                  const Eigen::Vector2d& x0, double epsilon,
                                  const std::vector<double>& c_grid,
                                  const CurveControls& ctrl) {
  if (!(a > 0.0)) throw ConfigError("rotating_frame_curve: a must be positive");
  if (!(epsilon > 0.0) || epsilon >= 1.0)
    throw ConfigError("rotating_frame_curve: epsilon outside (0,1)");

  ProfileCurve curve;
  curve.kind = ProfileCurve::Kind::ExactLinearized;
  curve.epsilon = epsilon;

  const double t_eps = std::log(1.0 / epsilon) / (2.0 * a);
  const double w_eps = 1.0 / a;
  const double sigma_inf2 = epsilon / (2.0 * a);

  std::vector<double> cs = c_grid;
  std::sort(cs.begin(), cs.end());
  for (double c : cs) {
    const double t = t_eps + c * w_eps;
    if (t <= 0.0) {
      curve.skipped.push_back({c, "t_eps + c w_eps <= 0"});
      continue;
    }
    // Law of x^eps(t): mean e^{-At} x0, covariance eps(1-e^{-2at})/(2a) I
    // (the Lyapunov integral commutes for this normal A). The frame
    // rotation R(-bt) maps the mean to e^{-at} x0 and fixes the
    // isotropic covariance.
    const double amp = std::exp(-a * t);
    const Eigen::Vector2d mean_frame = amp * x0;
    const double sigma2 = sigma_inf2 * (1.0 - std::exp(-2.0 * a * t));
    (void)b_param;  // the rotation leaves both the mean norm and covariance alone

    const GaussianDist law(mean_frame, SpdMatrix(sigma2 * Eigen::Matrix2d::Identity()));
    const GaussianDist stat(Eigen::Vector2d::Zero().eval(),
                            SpdMatrix(sigma_inf2 * Eigen::Matrix2d::Identity()));
    CurvePoint pt;
    pt.c = c;
    pt.t = t;
    pt.distance = tv_general(law, stat, ctrl.quadrature);
    curve.points.push_back(pt);
  }
  return curve;
}

double rotating_profile_G(double a, const Eigen::Vector2d& x0, double c) {
  // A^{1/2} for A = aI + b J taken as the principal square root of the
  // symmetric part, sqrt(a) I.
  const Eigen::Vector2d mean = std::sqrt(2.0) * std::exp(-c) * std::sqrt(a) * x0;
  return tv_identity_cov(mean);
}

CutoffVerdict cutoff_verdict(const PotentialModel& model, double epsilon,
                             const Eigen::VectorXd& x0, double threshold_high,
                             double threshold_low, const CurveControls& ctrl) {
  const SpectralData spectral = spectral_at_origin(model);
  const CutoffSchedule sched =
      cutoff_schedule(spectral, epsilon, ScheduleVariant::Linearized);
  CutoffVerdict v;
  v.threshold_high = threshold_high;
  v.threshold_low = threshold_low;
  v.distance_pre = linearized_distance_at(model, epsilon, x0, 0.8 * sched.t_eps, ctrl);
  v.distance_post = linearized_distance_at(model, epsilon, x0, 1.25 * sched.t_eps, ctrl);
  v.holds = v.distance_pre >= threshold_high && v.distance_post <= threshold_low;
  return v;
}

}  // namespace cutoff
