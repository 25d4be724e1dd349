#include "cutoff/sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "cutoff/rng.hpp"

namespace cutoff {

namespace {

void validate_common(int model_dim, const Eigen::VectorXd& x0, const TimeGrid& grid,
                     int n_paths, double h_max) {
  if (x0.size() != model_dim) throw ConfigError("simulate: x0 dimension mismatch");
  if (!x0.allFinite()) throw ConfigError("simulate: non-finite x0");
  if (n_paths < 1) throw ConfigError("simulate: n_paths must be >= 1");
  if (!(grid.t_end > 0.0) || grid.n_steps < 1)
    throw ConfigError("simulate: bad time grid");
  if (grid.step() > h_max * (1.0 + 1e-12))
    throw ConfigError("simulate: grid step " + std::to_string(grid.step()) +
                      " exceeds 0.01 / local Hessian bound " + std::to_string(h_max));
}

std::vector<int> full_indices(int n_times) {
  std::vector<int> idx(n_times);
  for (int i = 0; i < n_times; ++i) idx[i] = i;
  return idx;
}

std::vector<int> strided_indices(int n_times, int stride) {
  std::vector<int> idx;
  for (int i = 0; i < n_times; i += stride) idx.push_back(i);
  if (idx.back() != n_times - 1) idx.push_back(n_times - 1);
  return idx;
}

template <typename DriftFn>
void run_paths_nonlinear(DriftFn&& drift, int dim, double epsilon,
                         const Eigen::VectorXd& x0, const TimeGrid& grid,
                         std::span<const int> record, int n_paths,
                         std::uint64_t seed, int n_workers, std::span<double> out) {
  const double h = grid.step();
  const double noise = std::sqrt(epsilon * h);
  const double blow_up = 1e6 * std::max(1.0, x0.norm());
  const std::size_t n_rec = record.size();

  auto worker = [&](int p_begin, int p_end) {
    Eigen::VectorXd x(dim), d(dim);
    for (int p = p_begin; p < p_end; ++p) {
      RandomStream rs(seed, static_cast<std::uint64_t>(p));
      x = x0;
      std::size_t rec_pos = 0;
      double* base = out.data() + static_cast<std::size_t>(p) * n_rec * dim;
      if (rec_pos < n_rec && record[rec_pos] == 0) {
        for (int i = 0; i < dim; ++i) base[i] = x(i);
        ++rec_pos;
      }
      for (int k = 1; k <= grid.n_steps; ++k) {
        drift(x, d);
        if (epsilon > 0.0) {
          for (int i = 0; i < dim; ++i) x(i) += h * d(i) + noise * rs.normal();
        } else {
          for (int i = 0; i < dim; ++i) x(i) += h * d(i);
        }
        if (x.squaredNorm() > blow_up * blow_up)
          throw NumericError(
              "simulate: path diverged (wrong step size or non-coercive model)");
        if (rec_pos < n_rec && record[rec_pos] == k) {
          double* slot = base + rec_pos * dim;
          for (int i = 0; i < dim; ++i) slot[i] = x(i);
          ++rec_pos;
        }
      }
    }
  };

  if (n_workers <= 1) {
    worker(0, n_paths);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n_paths + n_workers - 1) / n_workers;
  std::vector<std::exception_ptr> errors(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    const int b = std::min(w * chunk, n_paths);
    const int e = std::min(b + chunk, n_paths);
    pool.emplace_back([&, w, b, e] {
      try {
        worker(b, e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace

TimeGrid make_grid(const PotentialModel& model, double epsilon, double t_end,
                   double x0_radius) {
  const double bound = model.hessian_bound(x0_radius + 1.0);
  double h = std::min(0.01, 0.01 / std::max(bound, 1e-6));
  if (epsilon > 0.0) h = std::min(h, 0.1 * std::sqrt(epsilon));
  TimeGrid grid;
  grid.t_end = t_end;
  grid.n_steps = std::max(1, static_cast<int>(std::ceil(t_end / h - 1e-12)));
  return grid;
}

TrajectoryEnsemble simulate_paths(const PotentialModel& model, double epsilon,
                                  const Eigen::VectorXd& x0, const TimeGrid& grid,
                                  int n_paths, std::uint64_t seed, int n_workers,
                                  int record_stride) {
  const double h_max = 0.01 / std::max(model.hessian_bound(x0.norm() + 1.0), 1e-6);
  validate_common(model.dim(), x0, grid, n_paths, h_max);
  const auto record = record_stride <= 1 ? full_indices(grid.n_times())
                                         : strided_indices(grid.n_times(), record_stride);

  TrajectoryEnsemble e;
  e.n_paths = n_paths;
  e.dim = model.dim();
  e.kind = TrajectoryEnsemble::Kind::Nonlinear;
  e.epsilon = epsilon;
  e.seed = seed;
  e.model_id = model.id();
  e.times.resize(record.size());
  for (std::size_t i = 0; i < record.size(); ++i) e.times(i) = grid.time(record[i]);
  e.data.resize(static_cast<std::size_t>(n_paths) * record.size() * e.dim);

  if (model.dim() == 1) {
    run_paths_nonlinear(
        [&model](const Eigen::VectorXd& x, Eigen::VectorXd& d) {
          d(0) = -model.grad_1d(x(0));
        },
        1, epsilon, x0, grid, record, n_paths, seed, n_workers, e.data);
  } else {
    run_paths_nonlinear(
        [&model](const Eigen::VectorXd& x, Eigen::VectorXd& d) {
          d = -model.evaluate(x).grad;
        },
        model.dim(), epsilon, x0, grid, record, n_paths, seed, n_workers, e.data);
  }
  return e;
}

TrajectoryEnsemble simulate_paths(const VectorFieldModel& field, double epsilon,
                                  const Eigen::VectorXd& x0, const TimeGrid& grid,
                                  int n_paths, std::uint64_t seed, int n_workers,
                                  int record_stride) {
  validate_common(field.dim(), x0, grid, n_paths, 1.0);  // no Hessian bound handy
  const auto record = record_stride <= 1 ? full_indices(grid.n_times())
                                         : strided_indices(grid.n_times(), record_stride);
  TrajectoryEnsemble e;
  e.n_paths = n_paths;
  e.dim = field.dim();
  e.kind = TrajectoryEnsemble::Kind::Nonlinear;
  e.epsilon = epsilon;
  e.seed = seed;
  e.model_id = field.id();
  e.times.resize(record.size());
  for (std::size_t i = 0; i < record.size(); ++i) e.times(i) = grid.time(record[i]);
  e.data.resize(static_cast<std::size_t>(n_paths) * record.size() * e.dim);
  run_paths_nonlinear(
      [&field](const Eigen::VectorXd& x, Eigen::VectorXd& d) { d = -field.field(x); },
      field.dim(), epsilon, x0, grid, record, n_paths, seed, n_workers, e.data);
  return e;
}

namespace {

// Coupled stepper: x via Euler-Maruyama on the nonlinear drift, y on the
// time-varying linearization at psi(t), both from one increment stream.
// psi is precomputed on the grid once (RK4 midpoint refinement).
struct CoupledContext {
  const PotentialModel* model;
  double epsilon;
  Eigen::VectorXd x0;
  TimeGrid grid;
  std::vector<Eigen::VectorXd> psi;       // at grid times
  std::vector<Eigen::MatrixXd> hess_psi;  // H_V(psi(t_k))
};

CoupledContext make_coupled_context(const PotentialModel& model, double epsilon,
                                    const Eigen::VectorXd& x0, const TimeGrid& grid) {
  CoupledContext ctx{&model, epsilon, x0, grid, {}, {}};
  StepControl ctrl;
  ctrl.h = grid.step();
  const SemiflowResult flow = integrate_semiflow(model, x0, grid.t_end, ctrl);
  if (flow.times.size() != grid.n_times())
    throw NumericError("simulate_coupled: semiflow grid mismatch");
  ctx.psi = flow.states;
  ctx.hess_psi.reserve(grid.n_times());
  for (int k = 0; k < grid.n_times(); ++k) {
    if (model.dim() == 1)
      ctx.hess_psi.push_back(
          Eigen::MatrixXd::Constant(1, 1, model.hess_1d(ctx.psi[k](0))));
    else
      ctx.hess_psi.push_back(model.evaluate(ctx.psi[k]).hess);
  }
  return ctx;
}

void run_paths_coupled(const CoupledContext& ctx, std::span<const int> record,
                       int n_paths, std::uint64_t seed, int n_workers,
                       std::span<double> out_x, std::span<double> out_y) {
  const int dim = ctx.model->dim();
  const double h = ctx.grid.step();
  const double noise = std::sqrt(ctx.epsilon * h);
  const double sqrt_h = std::sqrt(h);
  const double sqrt_eps = std::sqrt(ctx.epsilon);
  const double blow_up = 1e6 * std::max(1.0, ctx.x0.norm());
  const std::size_t n_rec = record.size();
  const bool one_d = dim == 1;

  auto worker = [&](int p_begin, int p_end) {
    Eigen::VectorXd x(dim), y(dim), xi(dim), d(dim);
    for (int p = p_begin; p < p_end; ++p) {
      RandomStream rs(seed, static_cast<std::uint64_t>(p));
      x = ctx.x0;
      y.setZero();
      std::size_t rec_pos = 0;
      double* bx = out_x.data() + static_cast<std::size_t>(p) * n_rec * dim;
      double* by = out_y.data() + static_cast<std::size_t>(p) * n_rec * dim;
      auto record_state = [&](int k) {
        double* sx = bx + rec_pos * dim;
        double* sy = by + rec_pos * dim;
        for (int i = 0; i < dim; ++i) {
          sx[i] = x(i);
          sy[i] = ctx.psi[k](i) + sqrt_eps * y(i);
        }
        ++rec_pos;
      };
      if (rec_pos < n_rec && record[rec_pos] == 0) record_state(0);
      for (int k = 1; k <= ctx.grid.n_steps; ++k) {
        for (int i = 0; i < dim; ++i) xi(i) = rs.normal();
        if (one_d) {
          const double hess = ctx.hess_psi[k - 1](0, 0);
          x(0) += -h * ctx.model->grad_1d(x(0)) + noise * xi(0);
          y(0) += -h * hess * y(0) + sqrt_h * xi(0);
        } else {
          d = -ctx.model->evaluate(x).grad;
          x += h * d + noise * xi;
          y += -h * (ctx.hess_psi[k - 1] * y) + sqrt_h * xi;
        }
        if (x.squaredNorm() > blow_up * blow_up)
          throw NumericError(
              "simulate_coupled: path diverged (wrong step size or non-coercive model)");
        if (rec_pos < n_rec && record[rec_pos] == k) record_state(k);
      }
    }
  };

  if (n_workers <= 1) {
    worker(0, n_paths);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n_paths + n_workers - 1) / n_workers;
  std::vector<std::exception_ptr> errors(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    const int b = std::min(w * chunk, n_paths);
    const int e = std::min(b + chunk, n_paths);
    pool.emplace_back([&, b, e, w] {
      try {
        worker(b, e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace

TrajectoryEnsemble simulate_coupled_linearization(const PotentialModel& model,
                                                  double epsilon,
                                                  const Eigen::VectorXd& x0,
                                                  const TimeGrid& grid, int n_paths,
                                                  std::uint64_t seed, int n_workers,
                                                  int record_stride) {
  const double h_max = 0.01 / std::max(model.hessian_bound(x0.norm() + 1.0), 1e-6);
  validate_common(model.dim(), x0, grid, n_paths, h_max);
  const auto record = record_stride <= 1 ? full_indices(grid.n_times())
                                         : strided_indices(grid.n_times(), record_stride);
  const CoupledContext ctx = make_coupled_context(model, epsilon, x0, grid);

  TrajectoryEnsemble e;
  e.n_paths = n_paths;
  e.dim = model.dim();
  e.kind = TrajectoryEnsemble::Kind::CoupledPair;
  e.epsilon = epsilon;
  e.seed = seed;
  e.model_id = model.id();
  e.times.resize(record.size());
  for (std::size_t i = 0; i < record.size(); ++i) e.times(i) = grid.time(record[i]);
  const std::size_t total = static_cast<std::size_t>(n_paths) * record.size() * e.dim;
  e.data.resize(total);
  e.lin.resize(total);
  run_paths_coupled(ctx, record, n_paths, seed, n_workers, e.data, e.lin);
  return e;
}

void simulate_coupled_snapshots(const PotentialModel& model, double epsilon,
                                const Eigen::VectorXd& x0, const TimeGrid& grid,
                                std::span<const int> record_indices, int n_paths,
                                std::uint64_t seed, int n_workers,
                                std::span<double> out_x, std::span<double> out_y) {
  const double h_max = 0.01 / std::max(model.hessian_bound(x0.norm() + 1.0), 1e-6);
  validate_common(model.dim(), x0, grid, n_paths, h_max);
  const std::size_t need =
      static_cast<std::size_t>(n_paths) * record_indices.size() * model.dim();
  if (out_x.size() != need || out_y.size() != need)
    throw ConfigError("simulate_coupled_snapshots: output span size mismatch");
  const CoupledContext ctx = make_coupled_context(model, epsilon, x0, grid);
  run_paths_coupled(ctx, record_indices, n_paths, seed, n_workers, out_x, out_y);
}

double moment_coefficient(int dim, int order) {
  double c = 1.0;
  for (int j = 0; j < order; ++j) c *= dim + 2 * j;
  return c;
}

MomentReport moment_report(const TrajectoryEnsemble& coupled,
                           const SemiflowResult& semiflow,
                           const std::vector<int>& orders,
                           std::optional<double> residual_constant) {
  if (coupled.kind != TrajectoryEnsemble::Kind::CoupledPair)
    throw ConfigError("moment_report: ensemble kind must be coupled-pair");
  if (coupled.n_paths < 100)
    throw ConfigError("moment_report: insufficient sample (n_paths < 100)");
  for (int n : orders)
    if (n < 1 || n > 2)
      throw ConfigError("moment_report: orders must be within {1, 2}");

  // psi at the recorded times, interpolated from the dense semiflow grid.
  const int n_times = coupled.n_times();
  const int dim = coupled.dim;
  std::vector<Eigen::VectorXd> psi(n_times);
  {
    const double t_last = semiflow.times(semiflow.times.size() - 1);
    const double dt = semiflow.times(1) - semiflow.times(0);
    for (int k = 0; k < n_times; ++k) {
      const double t = coupled.times(k);
      if (t > t_last + 1e-9)
        throw ConfigError("moment_report: semiflow does not cover ensemble times");
      const int j = std::min<int>(static_cast<int>(std::round(t / dt)),
                                  static_cast<int>(semiflow.states.size()) - 1);
      if (std::abs(semiflow.times(j) - t) > 1e-9 * std::max(1.0, t))
        throw ConfigError("moment_report: ensemble times must lie on the semiflow grid");
      psi[k] = semiflow.states[j];
    }
  }

  MomentReport rep;
  rep.epsilon = coupled.epsilon;
  rep.n_paths = coupled.n_paths;
  const double eps = coupled.epsilon;
  const int n_paths = coupled.n_paths;

  std::vector<double> dev2(n_paths), res2(n_paths);
  for (int k = 0; k < n_times; ++k) {
    const double t = coupled.times(k);
    for (int p = 0; p < n_paths; ++p) {
      const auto xs = coupled.state(p, k);
      const auto ys = coupled.lin_state(p, k);
      double d2 = 0.0, r2 = 0.0;
      for (int i = 0; i < dim; ++i) {
        const double dx = xs[i] - psi[k](i);
        const double dr = xs[i] - ys[i];  // x - psi - sqrt(eps) y
        d2 += dx * dx;
        r2 += dr * dr;
      }
      dev2[p] = d2;
      res2[p] = r2;
    }
    for (int n : orders) {
      double mean = 0.0, m2 = 0.0;
      for (int p = 0; p < n_paths; ++p) {
        const double v = n == 1 ? dev2[p] : dev2[p] * dev2[p];
        const double delta = v - mean;
        mean += delta / (p + 1);
        m2 += delta * (v - mean);
      }
      const double se = std::sqrt(m2 / (n_paths - 1.0) / n_paths);
      MomentRow row;
      row.t = t;
      row.order = n;
      row.estimate = mean;
      row.std_error = se;
      row.bound = moment_coefficient(dim, n) * std::pow(eps, n) * std::pow(t, n);
      row.pass = mean - 3.0 * se <= row.bound;
      rep.rows.push_back(row);
    }
    {
      double mean = 0.0, m2 = 0.0;
      for (int p = 0; p < n_paths; ++p) {
        const double delta = res2[p] - mean;
        mean += delta / (p + 1);
        m2 += delta * (res2[p] - mean);
      }
      const double se = std::sqrt(m2 / (n_paths - 1.0) / n_paths);
      MomentRow row;
      row.t = t;
      row.order = 0;
      row.estimate = mean;
      row.std_error = se;
      row.bound = 0.0;  // filled after C is known
      rep.rows.push_back(row);
    }
  }

  // Fit C at this epsilon unless supplied: max of estimate / (eps^{3/2} t^{5/2}).
  double c_fit = 0.0;
  for (const auto& row : rep.rows) {
    if (row.order != 0 || row.t <= 0.0) continue;
    c_fit = std::max(c_fit,
                     row.estimate / (std::pow(eps, 1.5) * std::pow(row.t, 2.5)));
  }
  rep.residual_constant = residual_constant.value_or(c_fit);
  for (auto& row : rep.rows) {
    if (row.order != 0) continue;
    row.bound = rep.residual_constant * std::pow(eps, 1.5) * std::pow(row.t, 2.5);
    row.pass = row.estimate - 3.0 * row.std_error <= row.bound;
  }
  return rep;
}

std::vector<Eigen::VectorXd> sample_stationary(const PotentialModel& model,
                                               double epsilon, int n,
                                               std::uint64_t seed,
                                               StationaryMethod method) {
  if (n < 0) throw ConfigError("sample_stationary: n must be >= 0");
  std::vector<Eigen::VectorXd> out;
  if (n == 0) return out;
  out.reserve(n);
  const int d = model.dim();

  switch (method) {
    case StationaryMethod::ExactGaussian: {
      if (model.kind() != PotentialModel::Kind::OuDiagonal &&
          model.kind() != PotentialModel::Kind::Quadratic)
        throw ConfigError("sample_stationary: exact-gaussian requires a quadratic model");
      const SpdMatrix h0(model.hess0());
      const Eigen::MatrixXd half =
          std::sqrt(epsilon / 2.0) * h0.inverse_sqrt();  // (eps/2 H^-1)^{1/2}
      RandomStream rs(seed, 0xA3ull << 56);
      Eigen::VectorXd xi(d);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) xi(j) = rs.normal();
        out.push_back(half * xi);
      }
      return out;
    }
    case StationaryMethod::MetropolisAdjusted: {
      // MALA targeting pi = e^{-2V/eps}: proposal mean x + tau grad log pi.
      RandomStream rs(seed, 0xA2ull << 56);
      const double delta = model.declared_delta();
      double tau = 0.25 * epsilon / delta;
      Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
      Eigen::VectorXd xi(d);
      auto log_pi = [&](const Eigen::VectorXd& z) {
        return -2.0 * model.evaluate(z).value / epsilon;
      };
      auto grad_log_pi = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
        return (-2.0 / epsilon) * model.evaluate(z).grad;
      };
      auto step = [&](bool count, int& accepted) {
        const Eigen::VectorXd gx = grad_log_pi(x);
        for (int j = 0; j < d; ++j) xi(j) = rs.normal();
        const Eigen::VectorXd prop = x + tau * gx + std::sqrt(2.0 * tau) * xi;
        const Eigen::VectorXd gp = grad_log_pi(prop);
        const double fwd = -(prop - x - tau * gx).squaredNorm() / (4.0 * tau);
        const double bwd = -(x - prop - tau * gp).squaredNorm() / (4.0 * tau);
        const double log_alpha = log_pi(prop) - log_pi(x) + bwd - fwd;
        if (std::log(rs.uniform()) < log_alpha) {
          x = prop;
          if (count) ++accepted;
          return true;
        }
        return false;
      };
      // Warmup with step adaptation toward acceptance ~ 0.57.
      int dummy = 0;
      for (int batch = 0; batch < 20; ++batch) {
        int acc = 0;
        for (int i = 0; i < 50; ++i)
          if (step(false, dummy)) ++acc;
        const double rate = acc / 50.0;
        if (rate < 0.5) tau *= 0.8;
        else if (rate > 0.65) tau *= 1.25;
      }
      int accepted = 0;
      int proposals = 0;
      const int thin = 5;
      while (static_cast<int>(out.size()) < n) {
        for (int i = 0; i < thin; ++i) {
          step(true, accepted);
          ++proposals;
        }
        out.push_back(x);
      }
      if (static_cast<double>(accepted) / proposals < 0.1)
        throw NumericError("sample_stationary: MALA acceptance rate below 0.1 "
                           "(step-size error)");
      return out;
    }
    case StationaryMethod::LongRun: {
      // Independent paths burnt in to t = 30/delta; contraction leaves
      // e^{-60} of the initial condition.
      const double t_end = 30.0 / model.declared_delta();
      const TimeGrid grid = make_grid(model, epsilon, t_end, 1.0);
      const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(d);
      const double h = grid.step();
      const double noise = std::sqrt(epsilon * h);
      for (int p = 0; p < n; ++p) {
        RandomStream rs(seed, (0xA1ull << 56) + static_cast<std::uint64_t>(p));
        Eigen::VectorXd x = x0;
        for (int k = 0; k < grid.n_steps; ++k) {
          if (d == 1) {
            x(0) += -h * model.grad_1d(x(0)) + noise * rs.normal();
          } else {
            x += -h * model.evaluate(x).grad;
            for (int j = 0; j < d; ++j) x(j) += noise * rs.normal();
          }
        }
        out.push_back(x);
      }
      return out;
    }
  }
  throw ConfigError("sample_stationary: unknown method");
}

namespace {
constexpr char kMagic[8] = {'C', 'U', 'T', 'E', 'N', 'S', '0', '1'};
}

void save_ensemble(const TrajectoryEnsemble& e, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("save_ensemble: cannot open " + path);
  f.write(kMagic, 8);
  const std::int64_t np = e.n_paths, nt = e.n_times(), dim = e.dim,
                     kind = static_cast<std::int64_t>(e.kind);
  const std::uint64_t seed = e.seed;
  f.write(reinterpret_cast<const char*>(&np), 8);
  f.write(reinterpret_cast<const char*>(&nt), 8);
  f.write(reinterpret_cast<const char*>(&dim), 8);
  f.write(reinterpret_cast<const char*>(&kind), 8);
  f.write(reinterpret_cast<const char*>(&seed), 8);
  f.write(reinterpret_cast<const char*>(&e.epsilon), 8);
  f.write(reinterpret_cast<const char*>(e.times.data()), 8 * nt);
  f.write(reinterpret_cast<const char*>(e.data.data()), 8 * e.data.size());
  if (e.kind == TrajectoryEnsemble::Kind::CoupledPair)
    f.write(reinterpret_cast<const char*>(e.lin.data()), 8 * e.lin.size());
  if (!f) throw NumericError("save_ensemble: write failed for " + path);
}

TrajectoryEnsemble load_ensemble(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("load_ensemble: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw ConfigError("load_ensemble: bad magic in " + path);
  std::int64_t np, nt, dim, kind;
  std::uint64_t seed;
  double eps;
  f.read(reinterpret_cast<char*>(&np), 8);
  f.read(reinterpret_cast<char*>(&nt), 8);
  f.read(reinterpret_cast<char*>(&dim), 8);
  f.read(reinterpret_cast<char*>(&kind), 8);
  f.read(reinterpret_cast<char*>(&seed), 8);
  f.read(reinterpret_cast<char*>(&eps), 8);
  TrajectoryEnsemble e;
  e.n_paths = static_cast<int>(np);
  e.dim = static_cast<int>(dim);
  e.kind = static_cast<TrajectoryEnsemble::Kind>(kind);
  e.seed = seed;
  e.epsilon = eps;
  e.times.resize(nt);
  f.read(reinterpret_cast<char*>(e.times.data()), 8 * nt);
  e.data.resize(static_cast<std::size_t>(np) * nt * dim);
  f.read(reinterpret_cast<char*>(e.data.data()), 8 * e.data.size());
  if (e.kind == TrajectoryEnsemble::Kind::CoupledPair) {
    e.lin.resize(e.data.size());
    f.read(reinterpret_cast<char*>(e.lin.data()), 8 * e.lin.size());
  }
  if (!f) throw ConfigError("load_ensemble: truncated file " + path);
  return e;
}

void write_ensemble_summary_csv(const TrajectoryEnsemble& e, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("write_ensemble_summary_csv: cannot open " + path);
  f << "t";
  for (int i = 0; i < e.dim; ++i) f << ",mean_" << i;
  for (int i = 0; i < e.dim; ++i) f << ",var_" << i;
  f << "\n";
  char buf[64];
  for (int k = 0; k < e.n_times(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.12g", e.times(k));
    f << buf;
    for (int i = 0; i < e.dim; ++i) {
      double mean = 0.0;
      for (int p = 0; p < e.n_paths; ++p) mean += e.state(p, k)[i];
      mean /= e.n_paths;
      std::snprintf(buf, sizeof(buf), ",%.12g", mean);
      f << buf;
    }
    for (int i = 0; i < e.dim; ++i) {
      double mean = 0.0, m2 = 0.0;
      for (int p = 0; p < e.n_paths; ++p) {
        const double v = e.state(p, k)[i];
        const double delta = v - mean;
        mean += delta / (p + 1);
        m2 += delta * (v - mean);
      }
      const double var = e.n_paths > 1 ? m2 / (e.n_paths - 1) : 0.0;
      std::snprintf(buf, sizeof(buf), ",%.12g", var);
      f << buf;
    }
    f << "\n";
  }
}

}  // namespace cutoff
