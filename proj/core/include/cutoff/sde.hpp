#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutoff/models.hpp"
#include "cutoff/semiflow.hpp"

namespace cutoff {

/// Uniform simulation grid; the Euler-Maruyama step is the grid step,
/// which must satisfy h <= 0.01 / (local Hessian bound).
struct TimeGrid {
  double t_end = 1.0;
  int n_steps = 100;

  double step() const { return t_end / n_steps; }
  double time(int k) const { return t_end * k / n_steps; }
  int n_times() const { return n_steps + 1; }
};

/// Grid with the default step policy h = min(0.01/Delta_local, 0.1 sqrt(eps)).
TimeGrid make_grid(const PotentialModel& model, double epsilon, double t_end,
                   double x0_radius);

struct TrajectoryEnsemble {
  enum class Kind { Nonlinear, Linearized, CoupledPair };

  Eigen::VectorXd times;  // recorded times (subset of the simulation grid)
  int n_paths = 0;
  int dim = 0;
  Kind kind = Kind::Nonlinear;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::string model_id;

  // Row-major [path][time][dim]; `lin` holds y^eps for coupled pairs.
  std::vector<double> data;
  std::vector<double> lin;

  int n_times() const { return static_cast<int>(times.size()); }
  std::span<const double> state(int path, int k) const {
    return {&data[(static_cast<std::size_t>(path) * n_times() + k) * dim],
            static_cast<std::size_t>(dim)};
  }
  std::span<const double> lin_state(int path, int k) const {
    return {&lin[(static_cast<std::size_t>(path) * n_times() + k) * dim],
            static_cast<std::size_t>(dim)};
  }
};

/// Euler-Maruyama ensemble of the nonlinear diffusion
/// dx = -grad V(x) dt + sqrt(eps) dW. Bit-reproducible: path p consumes
/// the counter-based stream keyed by (seed, p) regardless of worker
/// count or execution order. record_stride thins the stored times.
TrajectoryEnsemble simulate_paths(const PotentialModel& model, double epsilon,
                                  const Eigen::VectorXd& x0, const TimeGrid& grid,
                                  int n_paths, std::uint64_t seed,
                                  int n_workers = 1, int record_stride = 1);
TrajectoryEnsemble simulate_paths(const VectorFieldModel& field, double epsilon,
                                  const Eigen::VectorXd& x0, const TimeGrid& grid,
                                  int n_paths, std::uint64_t seed,
                                  int n_workers = 1, int record_stride = 1);

/// Coupled pair (x^eps, y^eps = psi + sqrt(eps) y) driven by identical
/// Brownian increments; dy = -H_V(psi(t)) y dt + dW.
TrajectoryEnsemble simulate_coupled_linearization(
    const PotentialModel& model, double epsilon, const Eigen::VectorXd& x0,
    const TimeGrid& grid, int n_paths, std::uint64_t seed, int n_workers = 1,
    int record_stride = 1);

/// Streaming variant: snapshots of (x, y^eps) at selected grid indices
/// are written into caller-provided slabs laid out [path][snap][dim].
/// Used where full path storage would not fit.
void simulate_coupled_snapshots(const PotentialModel& model, double epsilon,
                                const Eigen::VectorXd& x0, const TimeGrid& grid,
                                std::span<const int> record_indices, int n_paths,
                                std::uint64_t seed, int n_workers,
                                std::span<double> out_x, std::span<double> out_y);

struct MomentRow {
  double t = 0.0;
  int order = 0;  // n for E|x - psi|^{2n}; 0 marks the coupling residual
  double estimate = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct MomentReport {
  std::vector<MomentRow> rows;
  double residual_constant = 0.0;  // C in C eps^{3/2} t^{5/2}, fitted if absent
  double epsilon = 0.0;
  int n_paths = 0;
};

/// Verdicts for E|x-psi|^{2n} <= c_n eps^n t^n with
/// c_n = prod_{j<n} (m + 2j), plus the first-order coupling residual.
/// Bound satisfied iff estimate - 3 SE <= bound.
MomentReport moment_report(const TrajectoryEnsemble& coupled,
                           const SemiflowResult& semiflow,
                           const std::vector<int>& orders,
                           std::optional<double> residual_constant = std::nullopt);

double moment_coefficient(int dim, int order);

enum class StationaryMethod { ExactGaussian, MetropolisAdjusted, LongRun };

/// n approximate draws from mu^eps (density proportional to e^{-2V/eps}).
std::vector<Eigen::VectorXd> sample_stationary(const PotentialModel& model,
                                               double epsilon, int n,
                                               std::uint64_t seed,
                                               StationaryMethod method);

// Flat binary ensemble layout: header (magic, dims, grid, seed) + row-major
// doubles. CSV summary: per-time mean and variance per component.
void save_ensemble(const TrajectoryEnsemble& e, const std::string& path);
TrajectoryEnsemble load_ensemble(const std::string& path);
void write_ensemble_summary_csv(const TrajectoryEnsemble& e, const std::string& path);

}  // namespace cutoff
