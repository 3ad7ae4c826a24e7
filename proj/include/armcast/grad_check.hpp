#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "armcast/matrix.hpp"

namespace armcast {

/// Central finite-difference gradient of a scalar function of a parameter
/// matrix: (f(θ+εeᵢ) − f(θ−εeᵢ)) / (2ε) per coordinate.
inline Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& theta,
                               double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_grad: eps must be > 0");
  Matrix grad(theta.rows(), theta.cols());
  Matrix work = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = work[i];
    work[i] = orig + eps;
    const double fp = f(work);
    work[i] = orig - eps;
    const double fm = f(work);
    work[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_grad: non-finite function value");
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

/// Max relative error between analytic and finite-difference gradients,
/// per-entry |a−b| / max(1e-8, |a|+|b|).
inline double grad_rel_error(const Matrix& analytic, const Matrix& numeric) {
  if (!analytic.same_shape(numeric)) throw std::invalid_argument("grad_rel_error: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric[i]));
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace armcast
