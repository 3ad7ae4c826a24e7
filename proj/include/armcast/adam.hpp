#pragma once

#include <cmath>
#include <stdexcept>

#include "armcast/matrix.hpp"

namespace armcast {

/// Bias-corrected Adam state for one parameter tensor.
struct AdamState {
  Matrix m;
  Matrix v;
  long t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const Matrix& params, double lr) {
    AdamState s;
    s.m = Matrix(params.rows(), params.cols());
    s.v = Matrix(params.rows(), params.cols());
    s.lr = lr;
    return s;
  }
};

/// One Adam update, in place. Zero gradients leave params bit-identical.
inline void adam_step(Matrix& params, const Matrix& grads, AdamState& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v))
    throw std::invalid_argument("adam_step: shape mismatch");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace armcast
