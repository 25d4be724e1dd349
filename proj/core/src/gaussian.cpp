#include "cutoff/gaussian.hpp"

#include <cmath>

namespace cutoff {

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw ConfigError(std::string(what) + ": non-finite entries");
}

}  // namespace

SpdMatrix::SpdMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() < 1)
    throw ConfigError("SpdMatrix: matrix must be square and non-empty");
  check_finite(m_, "SpdMatrix");

  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  const double asym = (m_ - m_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale)
    throw ConfigError("SpdMatrix: asymmetry " + std::to_string(asym / scale) +
                      " exceeds 1e-12 relative tolerance");
  m_ = ((m_ + m_.transpose()) / 2.0).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_);
  if (es.info() != Eigen::Success)
    throw NumericError("SpdMatrix: eigendecomposition failed");
  eigvals_ = es.eigenvalues();
  eigvecs_ = es.eigenvectors();

  const double lmax = eigvals_(eigvals_.size() - 1);
  if (!(lmax > 0.0) || eigvals_(0) <= 1e-14 * lmax)
    throw ConfigError("SpdMatrix: not positive definite (min eigenvalue " +
                      std::to_string(eigvals_(0)) + ")");
}

Eigen::MatrixXd SpdMatrix::sqrt() const {
  return eigvecs_ * eigvals_.cwiseSqrt().asDiagonal() * eigvecs_.transpose();
}

Eigen::MatrixXd SpdMatrix::inverse_sqrt() const {
  return eigvecs_ * eigvals_.cwiseSqrt().cwiseInverse().asDiagonal() *
         eigvecs_.transpose();
}

Eigen::MatrixXd SpdMatrix::inverse() const {
  return eigvecs_ * eigvals_.cwiseInverse().asDiagonal() * eigvecs_.transpose();
}

double SpdMatrix::log_det() const { return eigvals_.array().log().sum(); }

GaussianDist::GaussianDist(Eigen::VectorXd mean_in, SpdMatrix cov_in)
    : mean(std::move(mean_in)), cov(std::move(cov_in)) {
  if (mean.size() != cov.dim())
    throw ConfigError("GaussianDist: mean dimension " + std::to_string(mean.size()) +
                      " != covariance dimension " + std::to_string(cov.dim()));
  if (!mean.allFinite()) throw ConfigError("GaussianDist: non-finite mean");
}

}  // namespace cutoff
