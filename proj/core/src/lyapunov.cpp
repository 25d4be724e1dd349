#include "cutoff/lyapunov.hpp"

#include <cmath>

namespace cutoff {

namespace {

Eigen::MatrixXd hess_at(const PotentialModel& model, const Eigen::VectorXd& x) {
  if (model.dim() == 1) return Eigen::MatrixXd::Constant(1, 1, model.hess_1d(x(0)));
  return model.evaluate(x).hess;
}

Eigen::VectorXd drift_at(const PotentialModel& model, const Eigen::VectorXd& x) {
  if (model.dim() == 1) return Eigen::VectorXd::Constant(1, -model.grad_1d(x(0)));
  return -model.evaluate(x).grad;
}

struct JointState {
  Eigen::VectorXd x;
  Eigen::MatrixXd s;
};

// dx = -grad V(x); dS = -H(x) S - S H(x) + eps I. Frozen mode pins x at 0.
JointState derivative(const PotentialModel& model, double eps, bool frozen,
                      const JointState& st) {
  JointState d;
  if (frozen) {
    d.x = Eigen::VectorXd::Zero(st.x.size());
  } else {
    d.x = drift_at(model, st.x);
  }
  const Eigen::MatrixXd h =
      frozen ? model.hess0() : hess_at(model, st.x);
  d.s = -(h * st.s) - (st.s * h) +
        eps * Eigen::MatrixXd::Identity(st.s.rows(), st.s.cols());
  return d;
}

void rk4_joint(const PotentialModel& model, double eps, bool frozen, JointState& st,
               double h) {
  const JointState k1 = derivative(model, eps, frozen, st);
  JointState tmp{st.x + 0.5 * h * k1.x, st.s + 0.5 * h * k1.s};
  const JointState k2 = derivative(model, eps, frozen, tmp);
  tmp = {st.x + 0.5 * h * k2.x, st.s + 0.5 * h * k2.s};
  const JointState k3 = derivative(model, eps, frozen, tmp);
  tmp = {st.x + h * k3.x, st.s + h * k3.s};
  const JointState k4 = derivative(model, eps, frozen, tmp);
  st.x += (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
  st.s += (h / 6.0) * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s);
}

void check_symmetry(const Eigen::MatrixXd& s, double t) {
  const double scale = std::max(1e-300, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw NumericError("integrate_lyapunov: asymmetry drift above 1e-9 at t=" +
                       std::to_string(t));
}

double lyapunov_step(const PotentialModel& model, double radius) {
  return std::min(0.005, 0.1 / std::max(model.hessian_bound(radius), 1e-6));
}

}  // namespace

LyapunovSolution integrate_lyapunov(const PotentialModel& model, double epsilon,
                                    double t_end, LyapunovMode mode,
                                    std::optional<Eigen::VectorXd> x0,
                                    StepControl ctrl,
                                    std::optional<Eigen::MatrixXd> lambda0) {
  if (!(epsilon >= 0.0)) throw ConfigError("integrate_lyapunov: epsilon must be >= 0");
  if (!(t_end > 0.0)) throw ConfigError("integrate_lyapunov: t_end must be positive");
  const bool frozen = mode == LyapunovMode::Frozen;
  if (!frozen && !x0)
    throw ConfigError("integrate_lyapunov: along-flow mode requires x0");
  const int d = model.dim();
  if (x0 && x0->size() != d)
    throw ConfigError("integrate_lyapunov: x0 dimension mismatch");

  JointState st;
  st.x = x0 ? *x0 : Eigen::VectorXd::Zero(d);
  st.s = lambda0 ? *lambda0 : Eigen::MatrixXd::Zero(d, d);
  if (st.s.rows() != d || st.s.cols() != d)
    throw ConfigError("integrate_lyapunov: lambda0 dimension mismatch");

  const double radius = st.x.norm() + 1.0;
  const double h = ctrl.h > 0.0 ? ctrl.h : lyapunov_step(model, radius);
  const int n_steps = static_cast<int>(std::ceil(t_end / h - 1e-12));
  const double step = t_end / n_steps;

  LyapunovSolution out;
  out.mode = mode;
  out.epsilon = epsilon;
  out.times.resize(n_steps + 1);
  out.matrices.reserve(n_steps + 1);
  out.times(0) = 0.0;
  out.matrices.push_back(st.s);
  for (int k = 1; k <= n_steps; ++k) {
    rk4_joint(model, epsilon, frozen, st, step);
    if (!st.s.allFinite())
      throw NumericError("integrate_lyapunov: matrix became non-finite");
    check_symmetry(st.s, k * step);
    out.times(k) = k * step;
    out.matrices.push_back(st.s);
  }
  return out;
}

LyapunovSampler::LyapunovSampler(const PotentialModel& model, double epsilon,
                                 const Eigen::VectorXd& x0, double h)
    : model_(model), epsilon_(epsilon), x_(x0),
      cov_(Eigen::MatrixXd::Zero(model.dim(), model.dim())) {
  if (x0.size() != model.dim())
    throw ConfigError("LyapunovSampler: x0 dimension mismatch");
  h_ = h > 0.0 ? h : lyapunov_step(model, x0.norm() + 1.0);
}

void LyapunovSampler::rk4_step(double h) {
  JointState st{x_, cov_};
  rk4_joint(model_, epsilon_, false, st, h);
  x_ = std::move(st.x);
  cov_ = std::move(st.s);
}

void LyapunovSampler::advance_to(double t) {
  if (t < t_ - 1e-12) throw ConfigError("LyapunovSampler: times must be non-decreasing");
  while (t_ + h_ <= t) {
    rk4_step(h_);
    t_ += h_;
  }
  if (t - t_ > 1e-14) {
    rk4_step(t - t_);
    t_ = t;
  }
  check_symmetry(cov_, t_);
}

}  // namespace cutoff
