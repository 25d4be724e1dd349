#include "cutoff/models.hpp"

#include <cmath>

#include "cutoff/rng.hpp"

namespace cutoff {

namespace {

// 16-point Gauss-Legendre on [-1, 1]; exact through degree 31, which
// covers every polynomial gradient blend this module produces.
constexpr int kGl = 16;
constexpr double kGlX[kGl] = {
    -0.9894009349916499, -0.9445750230732326, -0.8656312023878318,
    -0.7554044083550030, -0.6178762444026438, -0.4580167776572274,
    -0.2816035507792589, -0.0950125098376374, 0.0950125098376374,
    0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
    0.7554044083550030,  0.8656312023878318,  0.9445750230732326,
    0.9894009349916499};
constexpr double kGlW[kGl] = {
    0.0271524594117541, 0.0622535239386479, 0.0951585116824928,
    0.1246289712555339, 0.1495959888165767, 0.1691565193950025,
    0.1826034150449236, 0.1894506104550685, 0.1894506104550685,
    0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479,
    0.0271524594117541};

double smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }
double smoothstep_d(double u) { return 6.0 * u * (1.0 - u); }

void require_dim(const PotentialModel& m, const Eigen::VectorXd& x) {
  if (x.size() != m.dim())
    throw ConfigError("model '" + m.id() + "': input dimension " +
                      std::to_string(x.size()) + " != " + std::to_string(m.dim()));
  if (!x.allFinite()) throw ConfigError("model '" + m.id() + "': non-finite input");
}

}  // namespace

PotentialModel PotentialModel::ou_diagonal(Eigen::VectorXd rates) {
  if (rates.size() < 1 || rates.minCoeff() <= 0.0)
    throw ConfigError("ou-diagonal: rates must be positive");
  PotentialModel m;
  m.kind_ = Kind::OuDiagonal;
  m.dim_ = static_cast<int>(rates.size());
  m.rates_ = std::move(rates);
  m.delta_ = m.rates_.minCoeff();
  m.Delta_ = m.rates_.maxCoeff();
  m.id_ = "ou-diagonal(" + std::to_string(m.dim_) + "d)";
  return m;
}

PotentialModel PotentialModel::quadratic(Eigen::MatrixXd spd) {
  const SpdMatrix a(std::move(spd));  // validates symmetry and positivity
  PotentialModel m;
  m.kind_ = Kind::Quadratic;
  m.dim_ = a.dim();
  m.a_ = a.matrix();
  m.delta_ = a.eigenvalues()(0);
  m.Delta_ = a.eigenvalues()(a.dim() - 1);
  m.id_ = "quadratic(" + std::to_string(m.dim_) + "d)";
  return m;
}

PotentialModel PotentialModel::quartic_1d(double a, double beta) {
  if (!(a > 0.0) || !(beta >= 0.0))
    throw ConfigError("quartic-1d: requires a > 0 and beta >= 0");
  PotentialModel m;
  m.kind_ = Kind::Quartic1d;
  m.dim_ = 1;
  m.qa_ = a;
  m.qb_ = beta;
  m.delta_ = a;  // V'' = a + 3 beta x^2 >= a
  if (beta == 0.0) m.Delta_ = a;
  m.id_ = "quartic-1d(a=" + std::to_string(a) + ",beta=" + std::to_string(beta) + ")";
  return m;
}

PotentialModel PotentialModel::custom_poly_1d(Eigen::VectorXd coeffs,
                                              double declared_delta) {
  if (coeffs.size() < 3)
    throw ConfigError("custom-polynomial: need degree >= 2");
  if (coeffs(0) != 0.0 || coeffs(1) != 0.0)
    throw ConfigError("custom-polynomial: c0 = c1 = 0 required (V(0)=0, V'(0)=0)");
  if (!(coeffs(2) > 0.0))
    throw ConfigError("custom-polynomial: c2 > 0 required");
  if (!(declared_delta > 0.0))
    throw ConfigError("custom-polynomial: declared delta must be positive");
  PotentialModel m;
  m.kind_ = Kind::CustomPoly1d;
  m.dim_ = 1;
  m.coeffs_ = std::move(coeffs);
  m.delta_ = declared_delta;
  m.id_ = "custom-polynomial(deg=" + std::to_string(m.coeffs_.size() - 1) + ")";
  return m;
}

double PotentialModel::value_1d(double x) const {
  switch (kind_) {
    case Kind::OuDiagonal:
      return 0.5 * rates_(0) * x * x;
    case Kind::Quadratic:
      return 0.5 * a_(0, 0) * x * x;
    case Kind::Quartic1d:
      return 0.5 * qa_ * x * x + 0.25 * qb_ * x * x * x * x;
    case Kind::CustomPoly1d: {
      double v = 0.0;
      for (int k = static_cast<int>(coeffs_.size()) - 1; k >= 0; --k)
        v = v * x + coeffs_(k);
      return v;
    }
    case Kind::Truncated1d: {
      const auto& t = *trunc_;
      const double ax = std::abs(x);
      if (ax <= t.M) return t.base->value_1d(x);
      const int side = x > 0 ? 0 : 1;
      const double sgn = x > 0 ? 1.0 : -1.0;
      if (ax >= t.M + 1.0) {
        // Quadratic tail: integral of g'(x) = g_seam + h_seam (x -+ M).
        auto tail_integral = [&](double z) {
          const double u = z - sgn * t.M;
          return t.g_seam[side] * u + 0.5 * t.h_seam[side] * u * u;
        };
        return t.v_outer[side] + tail_integral(x) - tail_integral(sgn * (t.M + 1.0));
      }
      // Blend zone: integrate the blended gradient from the seam.
      const double a = sgn * t.M;
      double acc = 0.0;
      const double half = 0.5 * (x - a);
      const double mid = 0.5 * (x + a);
      for (int i = 0; i < kGl; ++i)
        acc += kGlW[i] * grad_1d(mid + half * kGlX[i]);
      return t.v_seam[side] + half * acc;
    }
  }
  return 0.0;
}

double PotentialModel::grad_1d(double x) const {
  switch (kind_) {
    case Kind::OuDiagonal:
      return rates_(0) * x;
    case Kind::Quadratic:
      return a_(0, 0) * x;
    case Kind::Quartic1d:
      return qa_ * x + qb_ * x * x * x;
    case Kind::CustomPoly1d: {
      double v = 0.0;
      for (int k = static_cast<int>(coeffs_.size()) - 1; k >= 1; --k)
        v = v * x + k * coeffs_(k);
      return v;
    }
    case Kind::Truncated1d: {
      const auto& t = *trunc_;
      const double ax = std::abs(x);
      if (ax <= t.M) return t.base->grad_1d(x);
      const int side = x > 0 ? 0 : 1;
      const double sgn = x > 0 ? 1.0 : -1.0;
      const double gq = t.g_seam[side] + t.h_seam[side] * (x - sgn * t.M);
      if (ax >= t.M + 1.0) return gq;
      const double u = ax - t.M;
      const double s = smoothstep(u);
      return (1.0 - s) * t.base->grad_1d(x) + s * gq;
    }
  }
  return 0.0;
}

double PotentialModel::hess_1d(double x) const {
  switch (kind_) {
    case Kind::OuDiagonal:
      return rates_(0);
    case Kind::Quadratic:
      return a_(0, 0);
    case Kind::Quartic1d:
      return qa_ + 3.0 * qb_ * x * x;
    case Kind::CustomPoly1d: {
      double v = 0.0;
      for (int k = static_cast<int>(coeffs_.size()) - 1; k >= 2; --k)
        v = v * x + k * (k - 1) * coeffs_(k);
      return v;
    }
    case Kind::Truncated1d: {
      const auto& t = *trunc_;
      const double ax = std::abs(x);
      if (ax <= t.M) return t.base->hess_1d(x);
      const int side = x > 0 ? 0 : 1;
      const double sgn = x > 0 ? 1.0 : -1.0;
      if (ax >= t.M + 1.0) return t.h_seam[side];
      const double u = ax - t.M;
      const double s = smoothstep(u);
      const double gq = t.g_seam[side] + t.h_seam[side] * (x - sgn * t.M);
      return (1.0 - s) * t.base->hess_1d(x) + s * t.h_seam[side] +
             sgn * smoothstep_d(u) * (gq - t.base->grad_1d(x));
    }
  }
  return 0.0;
}

ModelEval PotentialModel::evaluate(const Eigen::VectorXd& x) const {
  require_dim(*this, x);
  ModelEval out;
  switch (kind_) {
    case Kind::OuDiagonal:
      out.value = 0.5 * (rates_.array() * x.array().square()).sum();
      out.grad = rates_.asDiagonal() * x;
      out.hess = rates_.asDiagonal();
      return out;
    case Kind::Quadratic:
      out.value = 0.5 * x.dot(a_ * x);
      out.grad = a_ * x;
      out.hess = a_;
      return out;
    default: {
      out.value = value_1d(x(0));
      out.grad = Eigen::VectorXd::Constant(1, grad_1d(x(0)));
      out.hess = Eigen::MatrixXd::Constant(1, 1, hess_1d(x(0)));
      return out;
    }
  }
}

double PotentialModel::hessian_bound(double radius) const {
  switch (kind_) {
    case Kind::OuDiagonal:
      return rates_.maxCoeff();
    case Kind::Quadratic:
      return SpdMatrix(a_).eigenvalues().maxCoeff();
    case Kind::Quartic1d:
      return qa_ + 3.0 * qb_ * radius * radius;
    default: {
      double h = 0.0;
      const int n = 2048;
      for (int i = 0; i <= n; ++i) {
        const double x = -radius + 2.0 * radius * i / n;
        h = std::max(h, std::abs(hess_1d(x)));
      }
      return h;
    }
  }
}

double PotentialModel::hess0_min_eigenvalue() const {
  if (dim_ == 1) return hess_1d(0.0);
  return SpdMatrix(hess0()).eigenvalues()(0);
}

Eigen::MatrixXd PotentialModel::hess0() const {
  return evaluate(Eigen::VectorXd::Zero(dim_)).hess;
}

VectorFieldModel::VectorFieldModel(int dim, Field f, Jacobian df,
                                   double declared_delta, std::string id)
    : dim_(dim), f_(std::move(f)), df_(std::move(df)), delta_(declared_delta),
      id_(std::move(id)) {
  if (dim_ < 1) throw ConfigError("VectorFieldModel: dimension must be >= 1");
  if (!(delta_ > 0.0)) throw ConfigError("VectorFieldModel: delta must be positive");
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim_);
  if (f_(zero).norm() > 1e-12)
    throw ConfigError("VectorFieldModel '" + id_ + "': F(0) != 0");
  const Eigen::MatrixXd j0 = df_(zero);
  const double scale = std::max(1.0, j0.cwiseAbs().maxCoeff());
  if ((j0 - j0.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ConfigError("VectorFieldModel '" + id_ + "': DF(0) not symmetric within 1e-10");
}

VectorFieldModel VectorFieldModel::from_potential(const PotentialModel& model) {
  return VectorFieldModel(
      model.dim(), [model](const Eigen::VectorXd& x) { return model.evaluate(x).grad; },
      [model](const Eigen::VectorXd& x) { return model.evaluate(x).hess; },
      model.declared_delta(), "grad(" + model.id() + ")");
}

VectorFieldModel VectorFieldModel::linear(const Eigen::MatrixXd& spd) {
  const SpdMatrix a(spd);
  const Eigen::MatrixXd mat = a.matrix();
  return VectorFieldModel(
      a.dim(), [mat](const Eigen::VectorXd& x) -> Eigen::VectorXd { return mat * x; },
      [mat](const Eigen::VectorXd&) { return mat; }, a.eigenvalues()(0),
      "linear-field(" + std::to_string(a.dim()) + "d)");
}

CoercivityReport check_coercivity(const PotentialModel& model,
                                  const CoercivitySample& sample, double delta,
                                  std::optional<double> Delta) {
  if (sample.count < 1) throw ConfigError("check_coercivity: count must be >= 1");
  CoercivityReport rep;
  RandomStream rs(sample.seed, 0xA4ull << 56);
  const int d = model.dim();

  auto random_point = [&](double radius) {
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x(i) = radius * (2.0 * rs.uniform() - 1.0);
    return x;
  };
  auto random_unit = [&]() {
    Eigen::VectorXd y(d);
    double n2 = 0.0;
    do {
      for (int i = 0; i < d; ++i) y(i) = rs.normal();
      n2 = y.squaredNorm();
    } while (n2 < 1e-12);
    return (y / std::sqrt(n2)).eval();
  };

  for (int i = 0; i < sample.count; ++i) {
    const Eigen::VectorXd x = random_point(sample.radius);
    const Eigen::VectorXd y = random_unit();
    const Eigen::MatrixXd h = model.evaluate(x).hess;
    const double rayleigh = y.dot(h * y);
    rep.checks++;
    rep.min_rayleigh = std::min(rep.min_rayleigh, rayleigh);
    rep.max_rayleigh = std::max(rep.max_rayleigh, rayleigh);
    const double tol = 1e-9 * std::max(1.0, std::abs(rayleigh));
    if (rayleigh < delta - tol) {
      rep.passed = false;
      if (rep.failure.empty()) {
        rep.failure = "Hessian Rayleigh quotient " + std::to_string(rayleigh) +
                      " < delta " + std::to_string(delta);
        rep.witness_x = x;
        rep.witness_y = y;
      }
    }
    if (Delta && rayleigh > *Delta + tol) {
      rep.passed = false;
      if (rep.failure.empty()) {
        rep.failure = "Hessian Rayleigh quotient " + std::to_string(rayleigh) +
                      " > Delta " + std::to_string(*Delta);
        rep.witness_x = x;
        rep.witness_y = y;
      }
    }
  }

  // Gradient monotonicity (coercivity characterization on pairs).
  for (int i = 0; i < sample.count / 2 + 1; ++i) {
    const Eigen::VectorXd x = random_point(sample.radius);
    const Eigen::VectorXd y = random_point(sample.radius);
    const Eigen::VectorXd dx = x - y;
    const double n2 = dx.squaredNorm();
    if (n2 < 1e-16) continue;
    const double inner =
        (model.evaluate(x).grad - model.evaluate(y).grad).dot(dx);
    rep.checks++;
    if (inner < delta * n2 * (1.0 - 1e-9) - 1e-12) {
      rep.passed = false;
      if (rep.failure.empty()) {
        rep.failure = "gradient monotonicity " + std::to_string(inner / n2) +
                      " < delta " + std::to_string(delta);
        rep.witness_x = x;
        rep.witness_y = y;
      }
    }
  }
  return rep;
}

PotentialModel build_truncated_model(const PotentialModel& base, double M) {
  if (base.dim() != 1)
    throw ConfigError("build_truncated_model: only 1D bases are supported");
  if (!(M > 0.0)) throw ConfigError("build_truncated_model: M must be positive");
  if (base.kind() == PotentialModel::Kind::Truncated1d)
    throw ConfigError("build_truncated_model: base is already truncated");

  // The base Hessian must dominate delta inside the ball.
  const double delta = base.declared_delta();
  {
    const int n = 4096;
    for (int i = 0; i <= n; ++i) {
      const double x = -M + 2.0 * M * i / n;
      if (base.hess_1d(x) < delta * (1.0 - 1e-9))
        throw ConfigError("build_truncated_model: base Hessian below delta at x=" +
                          std::to_string(x));
    }
  }

  auto data = std::make_shared<PotentialModel::TruncationData>();
  data->base = std::make_shared<PotentialModel>(base);
  data->M = M;
  for (int side = 0; side < 2; ++side) {
    const double xm = side == 0 ? M : -M;
    data->v_seam[side] = base.value_1d(xm);
    data->g_seam[side] = base.grad_1d(xm);
    data->h_seam[side] = base.hess_1d(xm);
  }

  PotentialModel m;
  m.kind_ = PotentialModel::Kind::Truncated1d;
  m.dim_ = 1;
  m.trunc_ = data;
  m.delta_ = delta;
  m.id_ = "truncated(" + base.id() + ",M=" + std::to_string(M) + ")";

  // V at the outer seams via the blended gradient.
  for (int side = 0; side < 2; ++side) {
    const double sgn = side == 0 ? 1.0 : -1.0;
    const double a = sgn * M;
    const double b = sgn * (M + 1.0);
    double acc = 0.0;
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (b + a);
    for (int i = 0; i < kGl; ++i) acc += kGlW[i] * m.grad_1d(mid + half * kGlX[i]);
    data->v_outer[side] = data->v_seam[side] + half * acc;
  }

  // Effective bounds over the blend zone, sampled densely.
  double hmin = std::numeric_limits<double>::infinity(), hmax = 0.0;
  const int n = 8192;
  for (int i = 0; i <= n; ++i) {
    const double x = -(M + 1.0) + 2.0 * (M + 1.0) * i / n;
    const double h = m.hess_1d(x);
    hmin = std::min(hmin, h);
    hmax = std::max(hmax, std::abs(h));
  }
  if (hmin < delta * (1.0 - 1e-9))
    throw ConfigError("build_truncated_model: blend loses coercivity (min Hessian " +
                      std::to_string(hmin) + " < delta " + std::to_string(delta) + ")");
  data->delta = delta;
  data->Delta = hmax;
  m.Delta_ = hmax;
  return m;
}

}  // namespace cutoff
