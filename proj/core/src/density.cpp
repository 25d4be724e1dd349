#include "cutoff/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cutoff/gaussian.hpp"

namespace cutoff {

namespace {

double trapezoid_weight_1d(const AxisSpec& ax, int j) {
  return (j == 0 || j == ax.n_cells) ? 0.5 * ax.step() : ax.step();
}

void require_density_dims(const PotentialModel& model, int max_dim, const char* op) {
  if (model.dim() > max_dim)
    throw ConfigError(std::string(op) + ": supports dims 1.." +
                      std::to_string(max_dim) + " only");
}

}  // namespace

double DensityGrid::integral() const {
  if (dim() == 1) {
    double acc = 0.0;
    for (int j = 0; j < axes[0].n_nodes(); ++j)
      acc += trapezoid_weight_1d(axes[0], j) * values[j];
    return acc;
  }
  double acc = 0.0;
  for (int i = 0; i < axes[0].n_nodes(); ++i) {
    const double wi = trapezoid_weight_1d(axes[0], i);
    for (int j = 0; j < axes[1].n_nodes(); ++j)
      acc += wi * trapezoid_weight_1d(axes[1], j) * at(i, j);
  }
  return acc;
}

void DensityGrid::normalize() {
  const double z = integral();
  if (!(z > 0.0) || !std::isfinite(z))
    throw NumericError("DensityGrid: non-normalizable (integral " +
                       std::to_string(z) + ")");
  for (double& v : values) v /= z;
}

void DensityGrid::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw ConfigError("DensityGrid: cannot open " + path);
  char buf[96];
  if (dim() == 1) {
    f << "x,density\n";
    for (int j = 0; j < axes[0].n_nodes(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g,%.12g\n", axes[0].node(j), values[j]);
      f << buf;
    }
    return;
  }
  f << "x,y,density\n";
  for (int i = 0; i < axes[0].n_nodes(); ++i)
    for (int j = 0; j < axes[1].n_nodes(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", axes[0].node(i),
                    axes[1].node(j), at(i, j));
      f << buf;
    }
}

namespace {

// Gibbs weights e^{-2V/eps} on the nodes of the given axes (unnormalized).
DensityGrid gibbs_on_axes(const PotentialModel& model, double epsilon,
                          const std::vector<AxisSpec>& axes) {
  DensityGrid g;
  g.axes = axes;
  if (axes.size() == 1) {
    g.values.resize(axes[0].n_nodes());
    for (int j = 0; j < axes[0].n_nodes(); ++j)
      g.values[j] = std::exp(-2.0 * model.value_1d(axes[0].node(j)) / epsilon);
  } else {
    g.values.resize(static_cast<std::size_t>(axes[0].n_nodes()) * axes[1].n_nodes());
    Eigen::VectorXd x(2);
    for (int i = 0; i < axes[0].n_nodes(); ++i) {
      x(0) = axes[0].node(i);
      for (int j = 0; j < axes[1].n_nodes(); ++j) {
        x(1) = axes[1].node(j);
        g.at(i, j) = std::exp(-2.0 * model.evaluate(x).value / epsilon);
      }
    }
  }
  return g;
}

double boundary_max(const DensityGrid& g) {
  if (g.dim() == 1) return std::max(g.values.front(), g.values.back());
  double m = 0.0;
  const int ni = g.axes[0].n_nodes(), nj = g.axes[1].n_nodes();
  for (int j = 0; j < nj; ++j)
    m = std::max({m, g.at(0, j), g.at(ni - 1, j)});
  for (int i = 0; i < ni; ++i)
    m = std::max({m, g.at(i, 0), g.at(i, nj - 1)});
  return m;
}

}  // namespace

DensityGrid stationary_density(const PotentialModel& model, double epsilon,
                               const GridSpec& spec) {
  require_density_dims(model, 2, "stationary_density");
  if (!(epsilon > 0.0)) throw ConfigError("stationary_density: epsilon must be positive");

  std::vector<AxisSpec> axes;
  if (spec.bounds) {
    axes = *spec.bounds;
    if (static_cast<int>(axes.size()) != model.dim())
      throw ConfigError("stationary_density: bounds dimension mismatch");
  } else {
    // Start from +- radius sigma of the Gaussian approximation.
    const SpdMatrix h0(model.hess0());
    for (int i = 0; i < model.dim(); ++i) {
      const double sigma = std::sqrt(epsilon / 2.0 *
                                     h0.inverse()(i, i));
      AxisSpec ax;
      ax.lo = -spec.radius_sigmas * sigma;
      ax.hi = spec.radius_sigmas * sigma;
      ax.n_cells = spec.cells;
      axes.push_back(ax);
    }
  }

  for (int attempt = 0;; ++attempt) {
    DensityGrid g = gibbs_on_axes(model, epsilon, axes);
    const double peak = *std::max_element(g.values.begin(), g.values.end());
    if (!(peak > 0.0))
      throw NumericError("stationary_density: density underflows on the grid");
    if (spec.bounds || boundary_max(g) < 1e-16 * peak || attempt >= 60) {
      if (!spec.bounds && boundary_max(g) >= 1e-16 * peak)
        throw NumericError("stationary_density: could not widen grid enough");
      g.normalize();
      return g;
    }
    for (auto& ax : axes) {
      ax.lo *= 1.4;
      ax.hi *= 1.4;
    }
  }
}

DensityGrid gaussian_on_grid(const std::vector<AxisSpec>& axes,
                             const Eigen::VectorXd& mean,
                             const Eigen::MatrixXd& cov) {
  const SpdMatrix c(cov);
  if (mean.size() != static_cast<int>(axes.size()) || c.dim() != mean.size())
    throw ConfigError("gaussian_on_grid: dimension mismatch");
  DensityGrid g;
  g.axes = axes;
  const double log_norm =
      -0.5 * mean.size() * std::log(2.0 * M_PI) - 0.5 * c.log_det();
  const Eigen::MatrixXd prec = c.inverse();
  if (axes.size() == 1) {
    g.values.resize(axes[0].n_nodes());
    for (int j = 0; j < axes[0].n_nodes(); ++j) {
      const double d = axes[0].node(j) - mean(0);
      g.values[j] = std::exp(log_norm - 0.5 * prec(0, 0) * d * d);
    }
  } else {
    g.values.resize(static_cast<std::size_t>(axes[0].n_nodes()) * axes[1].n_nodes());
    for (int i = 0; i < axes[0].n_nodes(); ++i) {
      const double d0 = axes[0].node(i) - mean(0);
      for (int j = 0; j < axes[1].n_nodes(); ++j) {
        const double d1 = axes[1].node(j) - mean(1);
        const double q = prec(0, 0) * d0 * d0 + 2.0 * prec(0, 1) * d0 * d1 +
                         prec(1, 1) * d1 * d1;
        g.at(i, j) = std::exp(log_norm - 0.5 * q);
      }
    }
  }
  return g;
}

double gaussian_approx_distance(const PotentialModel& model, double epsilon,
                                const GridSpec& spec) {
  require_density_dims(model, 2, "gaussian_approx_distance");
  const DensityGrid mu = stationary_density(model, epsilon, spec);
  const SpdMatrix h0(model.hess0());
  const Eigen::MatrixXd cov = (epsilon / 2.0) * h0.inverse();
  const DensityGrid gauss =
      gaussian_on_grid(mu.axes, Eigen::VectorXd::Zero(model.dim()), cov);
  return tv_between_grids(mu, gauss);
}

double tv_between_grids(const DensityGrid& d1, const DensityGrid& d2) {
  if (d1.dim() != d2.dim())
    throw ConfigError("tv_between_grids: dimension mismatch");
  for (int a = 0; a < d1.dim(); ++a) {
    const auto& x = d1.axes[a];
    const auto& y = d2.axes[a];
    if (x.n_cells != y.n_cells || std::abs(x.lo - y.lo) > 1e-12 * std::max(1.0, std::abs(x.lo)) ||
        std::abs(x.hi - y.hi) > 1e-12 * std::max(1.0, std::abs(x.hi)))
      throw ConfigError("tv_between_grids: incompatible axes");
  }
  double acc = 0.0;
  if (d1.dim() == 1) {
    for (int j = 0; j < d1.axes[0].n_nodes(); ++j)
      acc += trapezoid_weight_1d(d1.axes[0], j) * std::abs(d1.values[j] - d2.values[j]);
  } else {
    for (int i = 0; i < d1.axes[0].n_nodes(); ++i) {
      const double wi = trapezoid_weight_1d(d1.axes[0], i);
      for (int j = 0; j < d1.axes[1].n_nodes(); ++j)
        acc += wi * trapezoid_weight_1d(d1.axes[1], j) * std::abs(d1.at(i, j) - d2.at(i, j));
    }
  }
  return std::min(1.0, 0.5 * acc);
}

namespace {

// Bernoulli function B(z) = z / (e^z - 1), stable across the full range.
double bernoulli(double z) {
  if (std::abs(z) < 1e-5) return 1.0 - 0.5 * z + z * z / 12.0;
  if (z > 0.0) {
    const double em = std::exp(-z);
    return z * em / (1.0 - em);
  }
  return z / std::expm1(z);
}

}  // namespace

FpSolution solve_fokker_planck_1d(const PotentialModel& model, double epsilon,
                                  double x0, double t_end, const GridSpec& spec,
                                  double dt,
                                  const std::vector<double>& snapshot_times,
                                  const std::optional<DensityGrid>& initial) {
  if (model.dim() != 1)
    throw ConfigError("solve_fokker_planck_1d: requires a 1D model");
  if (!(epsilon > 0.0) || !(t_end > 0.0) || !(dt > 0.0))
    throw ConfigError("solve_fokker_planck_1d: epsilon, t_end, dt must be positive");

  AxisSpec ax;
  if (spec.bounds) {
    if (spec.bounds->size() != 1)
      throw ConfigError("solve_fokker_planck_1d: bounds dimension mismatch");
    ax = (*spec.bounds)[0];
  } else {
    const double sigma = std::sqrt(epsilon / (2.0 * model.hess_1d(0.0)));
    const double wing = std::max(spec.radius_sigmas * sigma, 0.08 * (std::abs(x0) + 1.0));
    ax.lo = std::min(0.0, x0) - wing;
    ax.hi = std::max(0.0, x0) + wing;
    ax.n_cells = spec.cells;
  }
  const double h = ax.step();
  const int n = ax.n_nodes();
  if (x0 < ax.lo + 2 * h || x0 > ax.hi - 2 * h)
    throw ConfigError("solve_fokker_planck_1d: x0 outside the grid interior");

  // Stability preconditions are part of the contract even though the
  // implicit stepping is unconditionally stable.
  const double hess_max = model.hessian_bound(std::max(std::abs(ax.lo), std::abs(ax.hi)));
  const double dt_diff = 0.25 * h * h / epsilon;
  const double dt_drift = 0.1 / std::max(hess_max, 1e-12);
  if (dt > dt_diff * (1.0 + 1e-9) || dt > dt_drift * (1.0 + 1e-9))
    throw ConfigError("solve_fokker_planck_1d: dt " + std::to_string(dt) +
                      " violates stability bounds (" + std::to_string(dt_diff) +
                      ", " + std::to_string(dt_drift) + ")");

  // Scharfetter-Gummel face coefficients from exact potential drops:
  // flux_{j+1/2} = (D/h) [B(-w_j) p_j - B(w_j) p_{j+1}],
  // w_j = -(V_{j+1} - V_j)/D. Discrete stationarity is the Gibbs ratio.
  const double diff = 0.5 * epsilon;
  std::vector<double> a(n - 1), b(n - 1), vol(n);
  for (int j = 0; j < n - 1; ++j) {
    const double dv = model.value_1d(ax.node(j + 1)) - model.value_1d(ax.node(j));
    const double w = -dv / diff;
    a[j] = diff / h * bernoulli(-w);
    b[j] = diff / h * bernoulli(w);
  }
  for (int j = 0; j < n; ++j) vol[j] = (j == 0 || j == n - 1) ? 0.5 * h : h;

  // Initial condition: one-cell Gaussian around x0, or a caller grid.
  std::vector<double> p(n);
  if (initial) {
    if (initial->dim() != 1 || initial->axes[0].n_cells != ax.n_cells ||
        std::abs(initial->axes[0].lo - ax.lo) > 1e-12 ||
        std::abs(initial->axes[0].hi - ax.hi) > 1e-12)
      throw ConfigError("solve_fokker_planck_1d: initial density grid mismatch");
    p = initial->values;
  } else {
    const double s0 = h;
    for (int j = 0; j < n; ++j) {
      const double d = ax.node(j) - x0;
      p[j] = std::exp(-0.5 * d * d / (s0 * s0));
    }
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += vol[j] * p[j];
    for (int j = 0; j < n; ++j) p[j] /= z;
  }

  std::vector<double> snaps = snapshot_times;
  if (snaps.empty()) snaps.push_back(t_end);
  std::sort(snaps.begin(), snaps.end());
  if (snaps.front() < 0.0 || snaps.back() > t_end * (1.0 + 1e-9))
    throw ConfigError("solve_fokker_planck_1d: snapshots outside [0, t_end]");

  FpSolution sol;
  sol.epsilon = epsilon;
  sol.scheme = {dt, ax.n_cells, ax.lo, ax.hi, initial ? 0.0 : h};

  // Theta scheme on the flux operator: theta = 1 (backward Euler) for a
  // short ramp over the one-cell initial peak, then Crank-Nicolson where
  // the explicit half keeps the update nonnegative. Positivity of
  // (I + (1-theta) dt Vol^-1 L) needs (1-theta) dt r_max <= 1 with
  // r_max the largest outflow rate; theta grows toward 1 when the
  // advection is unresolved on this grid.
  double r_max = 0.0;
  for (int j = 0; j < n; ++j) {
    double out = 0.0;
    if (j > 0) out += b[j - 1];
    if (j < n - 1) out += a[j];
    r_max = std::max(r_max, out / vol[j]);
  }
  auto theta_for = [&](double step) {
    const double load = step * r_max;
    if (load <= 2.0) return 0.5;
    return std::max(0.5, 1.0 - 0.95 / load);
  };
  std::vector<double> dl(n), dd(n), du(n), rhs(n), work(n);
  auto implicit_step = [&](double step, double theta) {
    for (int j = 0; j < n; ++j) {
      double diag = vol[j] / step;
      if (j > 0) diag += theta * b[j - 1];
      if (j < n - 1) diag += theta * a[j];
      dd[j] = diag;
      dl[j] = j > 0 ? -theta * a[j - 1] : 0.0;
      du[j] = j < n - 1 ? -theta * b[j] : 0.0;
      double explicit_flux = 0.0;  // (L p)_j = J_{j-1/2} - J_{j+1/2}
      if (j > 0) explicit_flux += a[j - 1] * p[j - 1] - b[j - 1] * p[j];
      if (j < n - 1) explicit_flux -= a[j] * p[j] - b[j] * p[j + 1];
      rhs[j] = vol[j] / step * p[j] + (1.0 - theta) * explicit_flux;
    }
    // Thomas solve.
    work[0] = du[0] / dd[0];
    rhs[0] = rhs[0] / dd[0];
    for (int j = 1; j < n; ++j) {
      const double m = 1.0 / (dd[j] - dl[j] * work[j - 1]);
      work[j] = du[j] * m;
      rhs[j] = (rhs[j] - dl[j] * rhs[j - 1]) * m;
    }
    p[n - 1] = rhs[n - 1];
    for (int j = n - 2; j >= 0; --j) p[j] = rhs[j] - work[j] * p[j + 1];
  };

  double mass0 = 0.0;
  for (int j = 0; j < n; ++j) mass0 += vol[j] * p[j];

  double t = 0.0;
  std::size_t snap_pos = 0;
  auto take_snapshot = [&](double at_t) {
    DensityGrid g;
    g.axes = {ax};
    g.values = p;
    double clipped = 0.0;
    for (int j = 0; j < n; ++j) {
      if (g.values[j] < 0.0) {
        clipped += vol[j] * -g.values[j];
        g.values[j] = 0.0;
      }
    }
    sol.clipped_mass = std::max(sol.clipped_mass, clipped);
    if (clipped > 1e-10)
      throw NumericError("solve_fokker_planck_1d: clipped mass above 1e-10");
    sol.times.push_back(at_t);
    sol.densities.push_back(std::move(g));
  };
  while (snap_pos < snaps.size() && snaps[snap_pos] <= 1e-15) {
    take_snapshot(0.0);
    ++snap_pos;
  }

  int steps_taken = 0;
  while (snap_pos < snaps.size()) {
    const double target = snaps[snap_pos];
    while (target - t > 1e-12) {
      const double step = std::min(dt, target - t);
      implicit_step(step, steps_taken < 8 ? 1.0 : theta_for(step));
      t += step;
      ++steps_taken;
    }
    double mass = 0.0;
    for (int j = 0; j < n; ++j) mass += vol[j] * p[j];
    if (std::abs(mass - mass0) > 1e-8)
      throw NumericError("solve_fokker_planck_1d: mass drift " +
                         std::to_string(mass - mass0));
    take_snapshot(target);
    ++snap_pos;
  }
  return sol;
}

DensityGrid kde_density(const std::vector<Eigen::VectorXd>& samples,
                        const BandwidthRule& rule, const GridSpec& spec) {
  if (samples.size() < 100)
    throw ConfigError("kde_density: need at least 100 samples");
  const int d = static_cast<int>(samples.front().size());
  if (d < 1 || d > 2) throw ConfigError("kde_density: dims 1..2 only");
  const auto n = samples.size();

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& s : samples) mean += s;
  mean /= static_cast<double>(n);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (const auto& s : samples) var += (s - mean).cwiseAbs2();
  var /= static_cast<double>(n - 1);

  Eigen::VectorXd bandwidth(d);
  for (int i = 0; i < d; ++i) {
    const double sigma = std::sqrt(var(i));
    if (rule.kind == BandwidthRule::Kind::Fixed) {
      if (!(rule.h > 0.0)) throw ConfigError("kde_density: fixed bandwidth must be positive");
      bandwidth(i) = rule.h;
    } else {
      if (sigma < 1e-12 * (1.0 + std::abs(mean(i))))
        throw ConfigError("kde_density: degenerate sample variance (bandwidth error)");
      bandwidth(i) = scott_bandwidth(n, sigma, d);
    }
  }

  std::vector<AxisSpec> axes;
  if (spec.bounds) {
    axes = *spec.bounds;
    if (static_cast<int>(axes.size()) != d)
      throw ConfigError("kde_density: bounds dimension mismatch");
  } else {
    for (int i = 0; i < d; ++i) {
      const double sigma = std::sqrt(var(i));
      AxisSpec ax;
      ax.lo = mean(i) - spec.radius_sigmas * sigma;
      ax.hi = mean(i) + spec.radius_sigmas * sigma;
      ax.n_cells = spec.cells;
      axes.push_back(ax);
    }
  }

  // Linear binning of the samples to nodes, then separable Gaussian blur.
  DensityGrid g;
  g.axes = axes;
  const int n0 = axes[0].n_nodes();
  const int n1 = d == 2 ? axes[1].n_nodes() : 1;
  g.values.assign(static_cast<std::size_t>(n0) * n1, 0.0);

  auto bin_axis = [](const AxisSpec& ax, double x, int& j, double& frac) {
    double u = (x - ax.lo) / ax.step();
    u = std::clamp(u, 0.0, static_cast<double>(ax.n_cells) - 1e-9);
    j = static_cast<int>(u);
    frac = u - j;
  };

  for (const auto& s : samples) {
    int j0;
    double f0;
    bin_axis(axes[0], s(0), j0, f0);
    if (d == 1) {
      g.values[j0] += 1.0 - f0;
      g.values[j0 + 1] += f0;
    } else {
      int j1;
      double f1;
      bin_axis(axes[1], s(1), j1, f1);
      g.at(j0, j1) += (1.0 - f0) * (1.0 - f1);
      g.at(j0, j1 + 1) += (1.0 - f0) * f1;
      g.at(j0 + 1, j1) += f0 * (1.0 - f1);
      g.at(j0 + 1, j1 + 1) += f0 * f1;
    }
  }

  for (int axis = 0; axis < d; ++axis) {
    const AxisSpec& ax = axes[axis];
    const double step = ax.step();
    const int reach = static_cast<int>(std::ceil(6.0 * bandwidth(axis) / step));
    std::vector<double> kernel(2 * reach + 1);
    for (int m = -reach; m <= reach; ++m)
      kernel[m + reach] = std::exp(-0.5 * (m * step) * (m * step) /
                                   (bandwidth(axis) * bandwidth(axis)));
    const int na = axis == 0 ? n0 : n1;
    const int nb = axis == 0 ? n1 : n0;
    std::vector<double> line(na), blurred(na);
    for (int other = 0; other < nb; ++other) {
      for (int i = 0; i < na; ++i)
        line[i] = axis == 0 ? (d == 1 ? g.values[i] : g.at(i, other))
                            : g.at(other, i);
      for (int i = 0; i < na; ++i) {
        double acc = 0.0;
        const int m_lo = std::max(-reach, -i);
        const int m_hi = std::min(reach, na - 1 - i);
        for (int m = m_lo; m <= m_hi; ++m) acc += kernel[m + reach] * line[i + m];
        blurred[i] = acc;
      }
      for (int i = 0; i < na; ++i) {
        if (axis == 0) {
          if (d == 1) g.values[i] = blurred[i];
          else g.at(i, other) = blurred[i];
        } else {
          g.at(other, i) = blurred[i];
        }
      }
    }
  }
  g.normalize();
  return g;
}

}  // namespace cutoff
