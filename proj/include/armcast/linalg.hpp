#pragma once

#include <algorithm>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "armcast/matrix.hpp"

namespace armcast {

/// Least-squares solve for X in A X = B.
///
/// lambda > 0: unique ridge solution (AᵀA + λI)⁻¹ AᵀB via Cholesky.
/// lambda == 0: minimum-norm solution via SVD; singular values below
/// max(N,D)·σmax·1e-12 are truncated. An all-zero A yields the zero matrix.
inline Matrix solve_least_squares(const Matrix& a, const Matrix& b, double lambda) {
  if (a.rows() != b.rows()) throw std::invalid_argument("solve_least_squares: row count mismatch");
  if (lambda < 0.0) throw std::invalid_argument("solve_least_squares: lambda must be >= 0");

  const auto n = static_cast<Eigen::Index>(a.rows());
  const auto d = static_cast<Eigen::Index>(a.cols());
  Matrix x(a.cols(), b.cols());

  if (lambda > 0.0) {
    Eigen::MatrixXd gram = a.map().transpose() * a.map();
    gram.diagonal().array() += lambda;
    Eigen::MatrixXd rhs = a.map().transpose() * b.map();
    x.map() = gram.llt().solve(rhs);
    return x;
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(a.map(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double smax = sigma.size() > 0 ? sigma(0) : 0.0;
  const double tol = static_cast<double>(std::max(n, d)) * smax * 1e-12;

  Eigen::VectorXd inv_sigma = Eigen::VectorXd::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > tol) inv_sigma(i) = 1.0 / sigma(i);

  x.map() = svd.matrixV() * inv_sigma.asDiagonal() * (svd.matrixU().transpose() * b.map());
  return x;
}

}  // namespace armcast
