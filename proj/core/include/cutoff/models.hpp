#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutoff/errors.hpp"
#include "cutoff/gaussian.hpp"

namespace cutoff {

struct ModelEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

/// A coercive potential V with evaluatable value, gradient and Hessian,
/// plus declared coercivity bounds: delta ||y||^2 <= y' H_V(x) y (and
/// <= Delta ||y||^2 when Delta is finite). V(0) = 0 and grad V(0) = 0
/// hold for every kind by construction.
class PotentialModel {
 public:
  enum class Kind { OuDiagonal, Quadratic, Quartic1d, CustomPoly1d, Truncated1d };

  static PotentialModel ou_diagonal(Eigen::VectorXd rates);
  static PotentialModel quadratic(Eigen::MatrixXd spd);
  /// V(x) = a x^2 / 2 + beta x^4 / 4.
  static PotentialModel quartic_1d(double a, double beta);
  /// V(x) = sum_k c_k x^k with c_0 = c_1 = 0 and c_2 > 0.
  static PotentialModel custom_poly_1d(Eigen::VectorXd coeffs, double declared_delta);

  ModelEval evaluate(const Eigen::VectorXd& x) const;

  // Scalar fast paths for 1D simulation loops.
  double value_1d(double x) const;
  double grad_1d(double x) const;
  double hess_1d(double x) const;

  int dim() const { return dim_; }
  Kind kind() const { return kind_; }
  double declared_delta() const { return delta_; }
  std::optional<double> declared_Delta() const { return Delta_; }
  const std::string& id() const { return id_; }

  /// Upper bound for the Hessian norm on the ball of given radius;
  /// drives step-size selection.
  double hessian_bound(double radius) const;

  /// Smallest eigenvalue of the Hessian at the origin.
  double hess0_min_eigenvalue() const;

  Eigen::MatrixXd hess0() const;

  /// Base model of a truncation; null for every other kind.
  std::shared_ptr<const PotentialModel> truncation_base() const {
    return trunc_ ? trunc_->base : nullptr;
  }

 private:
  friend PotentialModel build_truncated_model(const PotentialModel&, double);
  PotentialModel() = default;

  struct TruncationData {
    std::shared_ptr<const PotentialModel> base;
    double M = 0.0;
    // Seam data, index 0 = right side (+M), 1 = left side (-M).
    double v_seam[2], g_seam[2], h_seam[2];
    double v_outer[2];  // V at +/- (M + 1)
    double delta = 0.0, Delta = 0.0;
  };

  Kind kind_ = Kind::OuDiagonal;
  int dim_ = 1;
  double delta_ = 1.0;
  std::optional<double> Delta_;
  std::string id_;

  Eigen::VectorXd rates_;    // OuDiagonal
  Eigen::MatrixXd a_;        // Quadratic
  double qa_ = 1.0, qb_ = 1.0;  // Quartic1d
  Eigen::VectorXd coeffs_;   // CustomPoly1d
  std::shared_ptr<TruncationData> trunc_;
};

/// Non-gradient drift F with Jacobian DF; F(0) = 0 and DF(0) symmetric
/// within 1e-10 are enforced at construction.
class VectorFieldModel {
 public:
  using Field = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using Jacobian = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  VectorFieldModel(int dim, Field f, Jacobian df, double declared_delta,
                   std::string id);

  static VectorFieldModel from_potential(const PotentialModel& model);
  static VectorFieldModel linear(const Eigen::MatrixXd& spd);

  Eigen::VectorXd field(const Eigen::VectorXd& x) const { return f_(x); }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const { return df_(x); }
  int dim() const { return dim_; }
  double declared_delta() const { return delta_; }
  const std::string& id() const { return id_; }

 private:
  int dim_;
  Field f_;
  Jacobian df_;
  double delta_;
  std::string id_;
};

/// Free-function form of PotentialModel::evaluate.
inline ModelEval evaluate_model(const PotentialModel& model, const Eigen::VectorXd& x) {
  return model.evaluate(x);
}

struct CoercivitySample {
  double radius = 10.0;
  int count = 200;
  std::uint64_t seed = 0;
};

struct CoercivityReport {
  bool passed = true;
  int checks = 0;
  double min_rayleigh = std::numeric_limits<double>::infinity();
  double max_rayleigh = 0.0;
  // First violation found, if any.
  std::string failure;
  Eigen::VectorXd witness_x, witness_y;
};

/// Samples x in the given ball and random unit y, asserting
/// delta <= y'H(x)y/|y|^2 (<= Delta when given) plus the gradient
/// monotonicity characterization on sampled pairs.
CoercivityReport check_coercivity(const PotentialModel& model,
                                  const CoercivitySample& sample, double delta,
                                  std::optional<double> Delta = std::nullopt);

/// C^2 truncation: identical to base on |x| <= M, constant Hessian
/// beyond M + 1, cubic-smoothstep gradient blend in between. 1D bases.
PotentialModel build_truncated_model(const PotentialModel& base, double M);

}  // namespace cutoff
