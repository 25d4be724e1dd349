#include "cutoff/semiflow.hpp"

#include <cmath>

namespace cutoff {

namespace {

using Drift = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Eigen::VectorXd rk4_step(const Drift& f, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd k1 = f(x);
  const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
  const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
  const Eigen::VectorXd k4 = f(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double default_step(double hessian_bound) {
  // 0.004 rather than 0.01: the linear closed-form contract (1e-10
  // per component) needs the extra fourth-order headroom at rates ~2.
  return std::min(0.004, 0.1 / std::max(hessian_bound, 1e-6));
}

SemiflowResult integrate_generic(const Drift& f, const Eigen::VectorXd& x0,
                                 double t_end, double h) {
  if (!(t_end > 0.0)) throw ConfigError("integrate_semiflow: t_end must be positive");
  if (!(h > 0.0)) throw ConfigError("integrate_semiflow: step must be positive");
  if (h < 1e-12 * t_end)
    throw NumericError("integrate_semiflow: step size underflow (stiffness)");

  const int n_steps = static_cast<int>(std::ceil(t_end / h - 1e-12));
  const double step = t_end / n_steps;
  SemiflowResult out;
  out.x0 = x0;
  out.times.resize(n_steps + 1);
  out.states.reserve(n_steps + 1);
  Eigen::VectorXd x = x0;
  out.times(0) = 0.0;
  out.states.push_back(x);
  for (int k = 1; k <= n_steps; ++k) {
    x = rk4_step(f, x, step);
    if (!x.allFinite())
      throw NumericError("integrate_semiflow: state became non-finite at t=" +
                         std::to_string(k * step));
    out.times(k) = k * step;
    out.states.push_back(x);
  }
  return out;
}

}  // namespace

SemiflowResult integrate_semiflow(const PotentialModel& model,
                                  const Eigen::VectorXd& x0, double t_end,
                                  StepControl ctrl) {
  if (x0.size() != model.dim())
    throw ConfigError("integrate_semiflow: x0 dimension mismatch");
  if (x0.norm() == 0.0)
    throw ConfigError("integrate_semiflow: x0 must be nonzero");
  const double h =
      ctrl.h > 0.0 ? ctrl.h : default_step(model.hessian_bound(x0.norm() + 1.0));
  if (model.dim() == 1) {
    return integrate_generic(
        [&model](const Eigen::VectorXd& x) {
          return Eigen::VectorXd::Constant(1, -model.grad_1d(x(0)));
        },
        x0, t_end, h);
  }
  return integrate_generic(
      [&model](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return -model.evaluate(x).grad;
      },
      x0, t_end, h);
}

SemiflowResult integrate_semiflow(const VectorFieldModel& field,
                                  const Eigen::VectorXd& x0, double t_end,
                                  StepControl ctrl) {
  if (x0.size() != field.dim())
    throw ConfigError("integrate_semiflow: x0 dimension mismatch");
  if (x0.norm() == 0.0)
    throw ConfigError("integrate_semiflow: x0 must be nonzero");
  const double h = ctrl.h > 0.0 ? ctrl.h : 0.005;
  return integrate_generic(
      [&field](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return -field.field(x);
      },
      x0, t_end, h);
}

SemiflowSampler::SemiflowSampler(const PotentialModel& model, Eigen::VectorXd x0,
                                 double h)
    : model_(model), x_(std::move(x0)) {
  h_ = h > 0.0 ? h : default_step(model_.hessian_bound(x_.norm() + 1.0));
}

const Eigen::VectorXd& SemiflowSampler::advance_to(double t) {
  if (t < t_ - 1e-12)
    throw ConfigError("SemiflowSampler: times must be non-decreasing");
  auto drift = [this](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    if (model_.dim() == 1)
      return Eigen::VectorXd::Constant(1, -model_.grad_1d(x(0)));
    return -model_.evaluate(x).grad;
  };
  while (t_ + h_ <= t) {
    x_ = rk4_step(drift, x_, h_);
    t_ += h_;
  }
  if (t - t_ > 1e-14) {
    x_ = rk4_step(drift, x_, t - t_);
    t_ = t;
  }
  return x_;
}

namespace {

SpectralData spectral_from_matrix(const Eigen::MatrixXd& h0, double declared_delta) {
  SpectralData out{0.0, {}, 1, SpdMatrix(h0)};
  const Eigen::VectorXd& ev = out.hess0.eigenvalues();
  out.alpha1 = ev(0);
  if (out.alpha1 < declared_delta - 1e-9)
    throw ConfigError("spectral_at_origin: alpha1 " + std::to_string(out.alpha1) +
                      " below declared delta " + std::to_string(declared_delta));
  const double tol = 1e-8 * std::max(1.0, ev(ev.size() - 1));
  int mult = 1;
  while (mult < ev.size() && ev(mult) - out.alpha1 <= tol) ++mult;
  out.multiplicity = mult;
  out.eigvecs = out.hess0.eigenvectors().leftCols(mult);
  return out;
}

}  // namespace

SpectralData spectral_at_origin(const PotentialModel& model) {
  try {
    return spectral_from_matrix(model.hess0(), model.declared_delta());
  } catch (const ConfigError& e) {
    throw ConfigError("model '" + model.id() + "': " + e.what());
  }
}

SpectralData spectral_at_origin(const VectorFieldModel& field) {
  const Eigen::MatrixXd j0 =
      field.jacobian(Eigen::VectorXd::Zero(field.dim()));
  try {
    return spectral_from_matrix((j0 + j0.transpose()) / 2.0, field.declared_delta());
  } catch (const ConfigError& e) {
    throw ConfigError("field '" + field.id() + "': " + e.what());
  }
}

namespace {

// Shared implementation: r(t) = e^{alpha1 t} psi(t), computed in log
// scale per component so the exponential never overflows while psi
// still carries signal.
AsymptoticDirection direction_impl(const Drift& drift, const Eigen::VectorXd& x0,
                                   const SpectralData& spectral,
                                   DirectionControl ctrl, double h) {
  const double a1 = spectral.alpha1;
  const double t_max = ctrl.t_max > 0.0 ? ctrl.t_max : 25.0 / a1;
  const double window = ctrl.window > 0.0 ? ctrl.window : 1.0 / a1;
  if (a1 * t_max > 690.0 && x0.norm() > 0.0) {
    // e^{alpha1 t} alone would overflow only matters if psi has not
    // decayed correspondingly; the log-scale product below saturates
    // first, so cap the horizon instead of failing late.
    if (a1 * t_max > 5000.0)
      throw NumericError("asymptotic_direction: t_max too large for float range");
  }

  const int n_steps = static_cast<int>(std::ceil(t_max / h));
  const int win_steps = std::max(2, static_cast<int>(std::round(window / h)));

  Eigen::VectorXd x = x0;
  Eigen::VectorXd win_sum = Eigen::VectorXd::Zero(x0.size());
  std::vector<Eigen::VectorXd> ring(win_steps, Eigen::VectorXd::Zero(x0.size()));
  Eigen::VectorXd prev_mean = Eigen::VectorXd::Zero(x0.size());
  bool have_prev = false;
  int filled = 0;

  AsymptoticDirection out;
  out.v = Eigen::VectorXd::Zero(x0.size());

  for (int k = 1; k <= n_steps; ++k) {
    x = rk4_step(drift, x, h);
    const double t = k * h;
    Eigen::VectorXd r(x.size());
    for (int i = 0; i < x.size(); ++i) {
      const double ax = std::abs(x(i));
      if (ax == 0.0) {
        r(i) = 0.0;
        continue;
      }
      const double lg = a1 * t + std::log(ax);
      if (lg > 690.0)
        throw NumericError("asymptotic_direction: e^{alpha1 t} psi(t) overflows; "
                           "alpha1 may exceed the true decay rate");
      r(i) = (x(i) > 0 ? 1.0 : -1.0) * std::exp(lg);
    }

    const int slot = (k - 1) % win_steps;
    win_sum += r - ring[slot];
    ring[slot] = r;
    if (filled < win_steps) {
      ++filled;
      continue;
    }
    if ((k - win_steps) % win_steps != 0) continue;

    const Eigen::VectorXd mean = win_sum / win_steps;
    if (have_prev) {
      const double diff = (mean - prev_mean).norm();
      if (diff < ctrl.tol * std::max(1.0, mean.norm())) {
        out.v = mean;
        out.converged = true;
        const double off = (mean - spectral.project(mean)).norm();
        out.residual = std::max(diff, off);
        break;
      }
    }
    prev_mean = mean;
    have_prev = true;
  }

  if (!out.converged) {
    out.v = prev_mean;
    out.residual = std::numeric_limits<double>::infinity();
  }
  out.near_zero = out.v.norm() < 1e-8 * x0.norm();
  return out;
}

}  // namespace

AsymptoticDirection asymptotic_direction(const PotentialModel& model,
                                         const Eigen::VectorXd& x0,
                                         const SpectralData& spectral,
                                         DirectionControl ctrl) {
  const double h =
      ctrl.h > 0.0 ? ctrl.h : default_step(model.hessian_bound(x0.norm() + 1.0));
  return direction_impl(
      [&model](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        if (model.dim() == 1)
          return Eigen::VectorXd::Constant(1, -model.grad_1d(x(0)));
        return -model.evaluate(x).grad;
      },
      x0, spectral, ctrl, h);
}

AsymptoticDirection asymptotic_direction(const VectorFieldModel& field,
                                         const Eigen::VectorXd& x0,
                                         const SpectralData& spectral,
                                         DirectionControl ctrl) {
  return direction_impl(
      [&field](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return -field.field(x);
      },
      x0, spectral, ctrl, ctrl.h > 0.0 ? ctrl.h : 0.005);
}

RotatingFrameResult rotating_frame_semiflow(double a, double b,
                                            const Eigen::Vector2d& x0,
                                            const Eigen::VectorXd& t_grid,
                                            double h) {
  if (!(a > 0.0)) throw ConfigError("rotating_frame_semiflow: a must be positive");
  if (t_grid.size() < 1 || t_grid(0) < 0.0)
    throw ConfigError("rotating_frame_semiflow: bad time grid");

  Eigen::Matrix2d A;
  A << a, b, -b, a;

  RotatingFrameResult out;
  out.flow.x0 = x0;
  out.flow.times = t_grid;
  out.flow.states.reserve(t_grid.size());
  out.frame_corrected.reserve(t_grid.size());

  Eigen::Vector2d x = x0;
  double t = 0.0;
  auto drift = [&A](const Eigen::Vector2d& v) -> Eigen::Vector2d { return -A * v; };

  for (int k = 0; k < t_grid.size(); ++k) {
    const double target = t_grid(k);
    if (target < t - 1e-12)
      throw ConfigError("rotating_frame_semiflow: time grid must be increasing");
    while (t + h <= target) {
      const Eigen::Vector2d k1 = drift(x);
      const Eigen::Vector2d k2 = drift(x + 0.5 * h * k1);
      const Eigen::Vector2d k3 = drift(x + 0.5 * h * k2);
      const Eigen::Vector2d k4 = drift(x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
    }
    const double rem = target - t;
    if (rem > 1e-15) {
      const Eigen::Vector2d k1 = drift(x);
      const Eigen::Vector2d k2 = drift(x + 0.5 * rem * k1);
      const Eigen::Vector2d k3 = drift(x + 0.5 * rem * k2);
      const Eigen::Vector2d k4 = drift(x + rem * k3);
      x += (rem / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t = target;
    }
    out.flow.states.push_back(x);

    const double c = std::cos(b * target), s = std::sin(b * target);
    // Standard planar rotation by angle -bt.
    Eigen::Matrix2d rot;
    rot << c, s, -s, c;
    // Literal variant with sines on the diagonal.
    Eigen::Matrix2d rot_sin;
    rot_sin << -s, c, -c, -s;

    const double amp = std::exp(a * target);
    const Eigen::Vector2d corrected = amp * (rot * x);
    out.frame_corrected.push_back(corrected);
    out.max_deviation = std::max(out.max_deviation, (corrected - x0).norm());
    out.max_deviation_sin_diag =
        std::max(out.max_deviation_sin_diag, (amp * (rot_sin * x) - x0).norm());
  }
  return out;
}

}  // namespace cutoff
