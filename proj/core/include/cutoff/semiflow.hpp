#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cutoff/models.hpp"

namespace cutoff {

struct StepControl {
  double h = 0.0;      // 0 selects min(0.01, 0.1 / local Hessian bound)
  double tol = 1e-10;  // used by convergence monitors, not the stepper
};

struct SemiflowResult {
  Eigen::VectorXd times;  // uniform grid including t = 0
  std::vector<Eigen::VectorXd> states;
  Eigen::VectorXd x0;

  const Eigen::VectorXd& state(int k) const { return states[k]; }
};

/// Classical fixed-step RK4 on dx = -grad V(x), dense uniform output.
SemiflowResult integrate_semiflow(const PotentialModel& model,
                                  const Eigen::VectorXd& x0, double t_end,
                                  StepControl ctrl = {});
SemiflowResult integrate_semiflow(const VectorFieldModel& field,
                                  const Eigen::VectorXd& x0, double t_end,
                                  StepControl ctrl = {});

/// Incremental semiflow evaluation at arbitrary increasing times.
class SemiflowSampler {
 public:
  SemiflowSampler(const PotentialModel& model, Eigen::VectorXd x0, double h = 0.0);
  /// Advances the flow to time t (>= current time) and returns psi(t).
  const Eigen::VectorXd& advance_to(double t);
  double time() const { return t_; }

 private:
  PotentialModel model_;
  Eigen::VectorXd x_;
  double t_ = 0.0;
  double h_ = 0.01;
};

struct SpectralData {
  double alpha1 = 0.0;       // smallest eigenvalue of H_V(0) or DF(0)
  Eigen::MatrixXd eigvecs;   // orthonormal basis of its eigenspace, columns
  int multiplicity = 1;
  SpdMatrix hess0;

  /// Orthogonal projection onto the alpha1 eigenspace.
  Eigen::VectorXd project(const Eigen::VectorXd& v) const {
    return eigvecs * (eigvecs.transpose() * v);
  }
};

SpectralData spectral_at_origin(const PotentialModel& model);
SpectralData spectral_at_origin(const VectorFieldModel& field);

struct DirectionControl {
  double t_max = 0.0;   // 0 selects 25 / alpha1
  double window = 0.0;  // 0 selects 1 / alpha1
  double tol = 1e-8;
  double h = 0.0;       // integrator step; 0 selects the default policy
};

struct AsymptoticDirection {
  Eigen::VectorXd v;
  bool converged = false;
  bool near_zero = false;  // |v| below 1e-8 |x0|: exceptional initial condition
  double residual = 0.0;
};

/// Estimates v(x0) = lim e^{alpha1 t} psi(t) by trailing-window
/// stabilization; reports non-convergence instead of guessing.
AsymptoticDirection asymptotic_direction(const PotentialModel& model,
                                         const Eigen::VectorXd& x0,
                                         const SpectralData& spectral,
                                         DirectionControl ctrl = {});
AsymptoticDirection asymptotic_direction(const VectorFieldModel& field,
                                         const Eigen::VectorXd& x0,
                                         const SpectralData& spectral,
                                         DirectionControl ctrl = {});

struct RotatingFrameResult {
  SemiflowResult flow;
  std::vector<Eigen::Vector2d> frame_corrected;  // e^{at} Rot(-bt) psi(t)
  double max_deviation = 0.0;        // from x0, standard rotation matrix
  double max_deviation_sin_diag = 0.0;  // alternative with sines on the diagonal
};

/// Planar spiral sink dx = -[[a, b], [-b, a]] x. The frame-corrected
/// trajectory uses the standard rotation by angle -bt; the deviation of
/// the sines-on-the-diagonal variant is reported alongside so the
/// discrepancy between the two conventions stays visible.
RotatingFrameResult rotating_frame_semiflow(double a, double b,
                                            const Eigen::Vector2d& x0,
                                            const Eigen::VectorXd& t_grid,
                                            double h = 1e-3);

}  // namespace cutoff
