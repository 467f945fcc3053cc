#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "wdrc/errors.hpp"

namespace wdrc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Definiteness checks use a symmetric eigensolve with a small negative
// slack so that round-off on a genuinely PSD matrix does not fail the test.
inline constexpr double kPsdSlack = -1e-10;

inline double min_symmetric_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_positive_semidefinite(const Matrix& m) {
  return min_symmetric_eigenvalue(m) >= kPsdSlack;
}

inline bool is_positive_definite(const Matrix& m) {
  return min_symmetric_eigenvalue(m) > -kPsdSlack;
}

inline bool is_symmetric(const Matrix& m, double tol = 1e-9) {
  return m.rows() == m.cols() &&
         (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

inline Matrix symmetrized(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

// Largest eigenvalue magnitude.
inline double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw ContractViolation("spectral_radius: matrix must be square");
  }
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

inline void require(bool cond, const char* msg) {
  if (!cond) throw ContractViolation(msg);
}

// Symmetric square root of a PSD matrix; a zero matrix maps to an exact
// zero so disabled noise stays bitwise off.
inline Matrix psd_sqrt(const Matrix& m) {
  if (m.isZero(0.0)) return Matrix::Zero(m.rows(), m.cols());
  if (m.isDiagonal(0.0)) {
    return Matrix(m.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  Vector vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace wdrc
