#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutoff/models.hpp"

namespace cutoff {

struct AxisSpec {
  double lo = -1.0;
  double hi = 1.0;
  int n_cells = 2048;

  double step() const { return (hi - lo) / n_cells; }
  int n_nodes() const { return n_cells + 1; }
  // Affine combination keeps symmetric grids exactly symmetric:
  // node(n - j) == -node(j) when lo == -hi.
  double node(int j) const {
    return ((n_cells - j) * lo + j * hi) / n_cells;
  }
};

/// Probability density sampled at the nodes of a rectangular grid
/// (dims 1-2); trapezoidal integral normalized to 1.
struct DensityGrid {
  std::vector<AxisSpec> axes;
  std::vector<double> values;  // row-major over nodes

  int dim() const { return static_cast<int>(axes.size()); }
  double integral() const;
  void normalize();
  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * axes[1].n_nodes() + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * axes[1].n_nodes() + j]; }

  void write_csv(const std::string& path) const;
};

struct GridSpec {
  int cells = 2048;
  double radius_sigmas = 10.0;
  // Explicit bounds override the automatic +-radius sigma box (per axis).
  std::optional<std::vector<AxisSpec>> bounds;
};

/// Gibbs density e^{-2V/eps} / M^eps on an automatically widened grid:
/// widening stops once the boundary density is below 1e-16 of the peak.
DensityGrid stationary_density(const PotentialModel& model, double epsilon,
                               const GridSpec& spec = {});

/// TV(mu^eps, G(0, (eps/2) H_V(0)^{-1})) by trapezoidal quadrature.
double gaussian_approx_distance(const PotentialModel& model, double epsilon,
                                const GridSpec& spec = {});

struct FpScheme {
  double dt = 0.0;
  int cells = 0;
  double lo = 0.0, hi = 0.0;
  double init_sigma = 0.0;  // width of the one-cell initial Gaussian
};

struct FpSolution {
  std::vector<double> times;
  std::vector<DensityGrid> densities;
  double epsilon = 0.0;
  FpScheme scheme;
  double clipped_mass = 0.0;
};

/// Conservative vertex-centered finite-volume solver for
///   dp/dt = d/dx (V' p) + (eps/2) d2p/dx2
/// with Scharfetter-Gummel (exponentially fitted) fluxes driven by the
/// exact potential differences, implicit Euler steps and zero-flux
/// boundaries. The discrete stationary state is the Gibbs profile on
/// the same nodes. Initial condition: Gaussian of one-cell width at x0,
/// or an explicit density on the same grid.
FpSolution solve_fokker_planck_1d(const PotentialModel& model, double epsilon,
                                  double x0, double t_end, const GridSpec& spec,
                                  double dt,
                                  const std::vector<double>& snapshot_times = {},
                                  const std::optional<DensityGrid>& initial = std::nullopt);

/// 1/2 trapezoidal integral of |d1 - d2|; requires identical axes.
double tv_between_grids(const DensityGrid& d1, const DensityGrid& d2);

struct BandwidthRule {
  enum class Kind { Fixed, Scott };
  Kind kind = Kind::Scott;
  double h = 0.0;  // Fixed only

  static BandwidthRule fixed(double h) { return {Kind::Fixed, h}; }
  static BandwidthRule scott() { return {Kind::Scott, 0.0}; }
};

/// Scott's rule bandwidth h = sigma n^{-1/(d+4)}.
inline double scott_bandwidth(std::size_t n, double sigma, int dim) {
  return sigma * std::pow(static_cast<double>(n), -1.0 / (dim + 4));
}

/// Gaussian-kernel estimate from samples (dims 1-2), normalized on the
/// grid. Scott's rule: h_i = sigma_i n^{-1/(d+4)}.
DensityGrid kde_density(const std::vector<Eigen::VectorXd>& samples,
                        const BandwidthRule& rule, const GridSpec& spec = {});

/// Evaluates a Gaussian density on an existing grid layout (same axes).
DensityGrid gaussian_on_grid(const std::vector<AxisSpec>& axes,
                             const Eigen::VectorXd& mean,
                             const Eigen::MatrixXd& cov);

}  // namespace cutoff
