#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cutoff/density.hpp"
#include "cutoff/gaussian_tv.hpp"
#include "cutoff/lyapunov.hpp"
#include "cutoff/models.hpp"
#include "cutoff/sde.hpp"
#include "cutoff/semiflow.hpp"

namespace cutoff {

enum class ScheduleVariant { Linearized, Nonlinear };

/// t_eps = ln(1/eps) / (2 alpha1); w_eps = 1/alpha1, plus delta_eps =
/// eps^gamma for the nonlinear variant. Requires 0 < eps < 1.
struct CutoffSchedule {
  double epsilon = 0.0;
  double t_eps = 0.0;
  double w_eps = 0.0;
  double delta_eps = 0.0;
  double gamma = 1.0 / 16.0;
  double alpha1 = 0.0;
  ScheduleVariant variant = ScheduleVariant::Linearized;

  double t_star(double c) const { return t_eps + c * w_eps; }
};

CutoffSchedule cutoff_schedule(const SpectralData& spectral, double epsilon,
                               ScheduleVariant variant, double gamma = 1.0 / 16.0);

/// G_{x0}(b) = || G(sqrt2 e^{-b} H^{1/2} v(x0), I) - G(0, I) ||.
/// Throws on non-converged or near-zero v (exceptional initial set).
double profile_G(const SpectralData& spectral, const AsymptoticDirection& v,
                 double b);

struct CurvePoint {
  double c = 0.0;
  double t = 0.0;
  double distance = 0.0;
  double std_error = 0.0;
};

struct SkippedPoint {
  double c = 0.0;
  std::string reason;
};

struct ProfileCurve {
  enum class Kind { ExactLinearized, FokkerPlanck, Kde, ProfileG };
  std::vector<CurvePoint> points;
  std::vector<SkippedPoint> skipped;
  Kind kind = Kind::ExactLinearized;
  double epsilon = 0.0;
};

struct CurveControls {
  double semiflow_step = 0.0;      // 0: automatic
  double gamma = 1.0 / 16.0;       // window-correction exponent
  int fp_cells = 2048;
  double fp_dt_safety = 0.9;       // fraction of the stability bound
  int kde_paths = 100000;
  int kde_grid_cells = 1024;
  int kde_bootstrap = 32;
  std::uint64_t seed = 0;
  int n_workers = 1;
  QuadratureSpec quadrature;
};

/// Exact linearized distance curve: mean psi(t), covariance from the
/// along-flow Lyapunov equation, distance to G(0, (eps/2) H^{-1}) per
/// c on the linearized schedule. No Monte Carlo anywhere.
ProfileCurve linearized_distance_curve(const PotentialModel& model, double epsilon,
                                       const Eigen::VectorXd& x0,
                                       const std::vector<double>& c_grid,
                                       const CurveControls& ctrl = {});

/// d^eps at one absolute time t (exact linearized computation).
double linearized_distance_at(const PotentialModel& model, double epsilon,
                              const Eigen::VectorXd& x0, double t,
                              const CurveControls& ctrl = {});

enum class NonlinearMethod { FokkerPlanck, Kde };

/// Nonlinear distance curve D^eps(t*(c)) = TV(law x^eps, mu^eps) on the
/// nonlinear schedule; the law comes from the 1D Fokker-Planck solve or
/// a KDE over simulated paths (dims <= 2, >= 1e5 paths).
ProfileCurve nonlinear_distance_curve(const PotentialModel& model, double epsilon,
                                      const Eigen::VectorXd& x0,
                                      const std::vector<double>& c_grid,
                                      NonlinearMethod method,
                                      const CurveControls& ctrl = {});

struct TruncationRow {
  double M = 0.0;
  double stationary_tv = 0.0;
  double exit_probability = 0.0;  // MC estimate for the truncated process
  double exit_bound = 0.0;        // 2 eps^2 t*^2 / (c_M^2 - eps t*)^2
  int exits = 0;
  int paths = 0;
};

struct TruncationReport {
  std::vector<TruncationRow> rows;
  double epsilon = 0.0;
  double t_star = 0.0;
};

/// Per M: TV between the stationary densities of base and truncation, and
/// the exit probability of the truncated process against the explicit
/// bound. Requires a 1D base and M > |x0|.
TruncationReport truncation_comparison(const PotentialModel& base,
                                       const std::vector<double>& m_list,
                                       double epsilon, double x0, double b = 0.0,
                                       int n_paths = 10000,
                                       std::uint64_t seed = 0,
                                       double gamma = 1.0 / 16.0,
                                       int n_workers = 1);

/// Exact rotating-frame curve for dx = -[[a,b],[-b,a]] x + sqrt(eps) dW:
/// the law is Gaussian with isotropic covariance, the frame rotation
/// acts on the mean, and the schedule is (1/2a) ln(1/eps), w = 1/a.
ProfileCurve rotating_frame_curve(double a, double b_param,
                                  const Eigen::Vector2d& x0, double epsilon,
                                  const std::vector<double>& c_grid,
                                  const CurveControls& ctrl = {});

/// Profile for the rotating system, with A^{1/2} taken as sqrt(a) I
/// (principal root of the symmetric part).
double rotating_profile_G(double a, const Eigen::Vector2d& x0, double c);

struct CutoffVerdict {
  double distance_pre = 0.0;   // at 0.8 t_eps
  double distance_post = 0.0;  // at 1.25 t_eps
  double threshold_high = 0.9;
  double threshold_low = 0.1;
  bool holds = false;
};

/// Definition-1 style verdict on the exact linearized family: distance
/// near 1 before t_eps and near 0 after, thresholds overridable.
CutoffVerdict cutoff_verdict(const PotentialModel& model, double epsilon,
                             const Eigen::VectorXd& x0, double threshold_high = 0.9,
                             double threshold_low = 0.1,
                             const CurveControls& ctrl = {});

}  // namespace cutoff
