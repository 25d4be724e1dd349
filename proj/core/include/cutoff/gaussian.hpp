#pragma once

#include <Eigen/Dense>

#include "cutoff/errors.hpp"

namespace cutoff {

/// Symmetric positive definite matrix with a cached eigendecomposition.
/// Construction fails loudly on asymmetry or on eigenvalues below
/// 1e-14 of the spectral radius; near-singular covariances must not be
/// silently regularized.
class SpdMatrix {
 public:
  explicit SpdMatrix(Eigen::MatrixXd m);

  static SpdMatrix identity(int dim) {
    return SpdMatrix(Eigen::MatrixXd::Identity(dim, dim));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  const Eigen::VectorXd& eigenvalues() const { return eigvals_; }  // ascending
  const Eigen::MatrixXd& eigenvectors() const { return eigvecs_; }

  Eigen::MatrixXd sqrt() const;
  Eigen::MatrixXd inverse_sqrt() const;
  Eigen::MatrixXd inverse() const;
  double log_det() const;

 private:
  Eigen::MatrixXd m_;
  Eigen::VectorXd eigvals_;
  Eigen::MatrixXd eigvecs_;
};

/// Gaussian distribution: the unit of every exact TV computation.
struct GaussianDist {
  GaussianDist(Eigen::VectorXd mean_in, SpdMatrix cov_in);

  static GaussianDist standard(int dim) {
    return GaussianDist(Eigen::VectorXd::Zero(dim), SpdMatrix::identity(dim));
  }

  int dim() const { return static_cast<int>(mean.size()); }

  Eigen::VectorXd mean;
  SpdMatrix cov;
};

}  // namespace cutoff
