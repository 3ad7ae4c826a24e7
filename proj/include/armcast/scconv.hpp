#pragma once

#include <stdexcept>

#include "armcast/layers.hpp"
#include "armcast/rng.hpp"

namespace armcast {

/// Self-calibrated convolution block. The input splits into channel halves
/// X1, X2; X1 is gated by a sigmoid calibration signal computed from a
/// pooled branch, X2 passes through a plain convolution:
///   M  = sigmoid(X1 + Upsample_r(F2(AvgPool_r(X1))))
///   Y1 = F4(F3(X1) ⊙ M),  Y2 = F1(X2),  out = concat(Y1, Y2)
struct SCConvParams {
  Matrix f1_w, f1_b;  // plain path, C/2 -> C/2
  Matrix f2_w, f2_b;  // calibration conv at pooled resolution
  Matrix f3_w, f3_b;  // gated path, pre-gate
  Matrix f4_w, f4_b;  // gated path, post-gate
  std::size_t half_channels = 0;
  std::size_t pool_rate = 4;

  static SCConvParams init(std::size_t channels, std::size_t pool_rate, Rng& rng) {
    if (channels % 2 != 0) throw std::invalid_argument("SCConvParams: channel count must be even");
    SCConvParams p;
    p.half_channels = channels / 2;
    p.pool_rate = pool_rate;
    const std::size_t half = p.half_channels;
    const double bound = std::sqrt(6.0 / static_cast<double>(9 * half + half));
    for (Matrix* w : {&p.f1_w, &p.f2_w, &p.f3_w, &p.f4_w})
      *w = rng.uniform_matrix(9 * half, half, -bound, bound);
    for (Matrix* b : {&p.f1_b, &p.f2_b, &p.f3_b, &p.f4_b}) *b = Matrix(1, half);
    return p;
  }
};

struct SCConvGrads {
  Matrix f1_w, f1_b, f2_w, f2_b, f3_w, f3_b, f4_w, f4_b;

  static SCConvGrads zeros_like(const SCConvParams& p) {
    SCConvGrads g;
    g.f1_w = Matrix(p.f1_w.rows(), p.f1_w.cols());
    g.f1_b = Matrix(1, p.f1_b.cols());
    g.f2_w = Matrix(p.f2_w.rows(), p.f2_w.cols());
    g.f2_b = Matrix(1, p.f2_b.cols());
    g.f3_w = Matrix(p.f3_w.rows(), p.f3_w.cols());
    g.f3_b = Matrix(1, p.f3_b.cols());
    g.f4_w = Matrix(p.f4_w.rows(), p.f4_w.cols());
    g.f4_b = Matrix(1, p.f4_b.cols());
    return g;
  }
};

struct SCConvCache {
  Tensor x1, x2;
  Tensor gate;    // M
  Tensor f3_out;  // pre-gate activations
  Tensor gated;   // F3(X1) ⊙ M
  Conv3x3Cache f1_cache, f2_cache, f3_cache, f4_cache;
};

inline Tensor scconv_forward(const Tensor& x, const SCConvParams& p, SCConvCache* cache = nullptr) {
  if (x.c % 2 != 0) throw std::invalid_argument("scconv_forward: channel count must be even");
  if (x.c / 2 != p.half_channels) throw std::invalid_argument("scconv_forward: channel mismatch");
  if (x.h % p.pool_rate != 0 || x.w % p.pool_rate != 0)
    throw std::invalid_argument("scconv_forward: pool rate must divide the spatial size");

  SCConvCache local;
  SCConvCache& c = cache ? *cache : local;
  const std::size_t half = x.c / 2;
  c.x1 = channel_slice(x, 0, half);
  c.x2 = channel_slice(x, half, x.c);

  Tensor pooled = avgpool_forward(c.x1, p.pool_rate);
  Tensor calib = conv3x3_forward(pooled, p.f2_w, p.f2_b, 1, cache ? &c.f2_cache : nullptr);
  Tensor up = upsample_forward(calib, p.pool_rate);
  Tensor pre = c.x1;
  pre.data += up.data;
  c.gate = sigmoid_forward(pre);

  c.f3_out = conv3x3_forward(c.x1, p.f3_w, p.f3_b, 1, cache ? &c.f3_cache : nullptr);
  c.gated = c.f3_out;
  c.gated.data = c.f3_out.data.hadamard(c.gate.data);
  Tensor y1 = conv3x3_forward(c.gated, p.f4_w, p.f4_b, 1, cache ? &c.f4_cache : nullptr);
  Tensor y2 = conv3x3_forward(c.x2, p.f1_w, p.f1_b, 1, cache ? &c.f1_cache : nullptr);
  return channel_concat(y1, y2);
}

inline Tensor scconv_backward(const Tensor& dout, const SCConvParams& p, const SCConvCache& c,
                              SCConvGrads& g) {
  const std::size_t half = p.half_channels;
  Tensor dy1 = channel_slice(dout, 0, half);
  Tensor dy2 = channel_slice(dout, half, 2 * half);

  // Plain path.
  Tensor dx2 = conv3x3_backward(dy2, c.f1_cache, p.f1_w, g.f1_w, g.f1_b);

  // Gated path: Y1 = F4(gated).
  Tensor dgated = conv3x3_backward(dy1, c.f4_cache, p.f4_w, g.f4_w, g.f4_b);
  Tensor df3_out = dgated;
  df3_out.data = dgated.data.hadamard(c.gate.data);
  Tensor dgate = dgated;
  dgate.data = dgated.data.hadamard(c.f3_out.data);

  Tensor dx1 = conv3x3_backward(df3_out, c.f3_cache, p.f3_w, g.f3_w, g.f3_b);

  // Gate: M = sigmoid(X1 + up); dpre = dM ⊙ M ⊙ (1−M).
  Tensor dpre = dgate;
  for (std::size_t i = 0; i < dpre.data.size(); ++i)
    dpre.data[i] *= c.gate.data[i] * (1.0 - c.gate.data[i]);
  dx1.data += dpre.data;

  Tensor dcalib = upsample_backward(dpre, p.pool_rate);
  Tensor dpooled = conv3x3_backward(dcalib, c.f2_cache, p.f2_w, g.f2_w, g.f2_b);
  dx1.data += avgpool_backward(dpooled, p.pool_rate).data;

  return channel_concat(dx1, dx2);
}

}  // namespace armcast
