#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cutoff/models.hpp"
#include "cutoff/semiflow.hpp"

namespace cutoff {

enum class LyapunovMode { Frozen, AlongFlow };

/// Solution of dS = -H S - S H + eps I with H = H_V(0) (frozen) or
/// H = H_V(psi(t)) (along the flow). Either way the limit is
/// (eps/2) H_V(0)^{-1}.
struct LyapunovSolution {
  Eigen::VectorXd times;
  std::vector<Eigen::MatrixXd> matrices;
  LyapunovMode mode = LyapunovMode::Frozen;
  double epsilon = 0.0;

  const Eigen::MatrixXd& terminal() const { return matrices.back(); }
};

LyapunovSolution integrate_lyapunov(
    const PotentialModel& model, double epsilon, double t_end, LyapunovMode mode,
    std::optional<Eigen::VectorXd> x0 = std::nullopt, StepControl ctrl = {},
    std::optional<Eigen::MatrixXd> lambda0 = std::nullopt);

/// Joint incremental integration of (psi, Delta): the along-flow
/// covariance at arbitrary increasing times without dense storage.
class LyapunovSampler {
 public:
  LyapunovSampler(const PotentialModel& model, double epsilon,
                  const Eigen::VectorXd& x0, double h = 0.0);

  /// Advances to time t; state() and covariance() then refer to t.
  void advance_to(double t);
  const Eigen::VectorXd& state() const { return x_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  double time() const { return t_; }

 private:
  void rk4_step(double h);

  PotentialModel model_;
  double epsilon_;
  Eigen::VectorXd x_;
  Eigen::MatrixXd cov_;
  double t_ = 0.0;
  double h_ = 0.005;
};

}  // namespace cutoff
