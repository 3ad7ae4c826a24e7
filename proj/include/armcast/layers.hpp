#pragma once

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "armcast/matrix.hpp"

namespace armcast {

/// Batched feature map stored spatial-major: data is (batch·h·w) × c, so
/// channel split/concat are column slices and 1×1 convolution is a matmul.
struct Tensor {
  std::size_t batch = 0, h = 0, w = 0, c = 0;
  Matrix data;

  Tensor() = default;
  Tensor(std::size_t batch_, std::size_t h_, std::size_t w_, std::size_t c_)
      : batch(batch_), h(h_), w(w_), c(c_), data(batch_ * h_ * w_, c_) {}

  std::size_t pixel_row(std::size_t b, std::size_t y, std::size_t x) const {
    return (b * h + y) * w + x;
  }
  double& at(std::size_t b, std::size_t y, std::size_t x, std::size_t ch) {
    return data(pixel_row(b, y, x), ch);
  }
  double at(std::size_t b, std::size_t y, std::size_t x, std::size_t ch) const {
    return data(pixel_row(b, y, x), ch);
  }

  Tensor like_shape() const { return Tensor(batch, h, w, c); }
};

inline Tensor channel_slice(const Tensor& t, std::size_t c0, std::size_t c1) {
  Tensor out(t.batch, t.h, t.w, c1 - c0);
  out.data = t.data.col_block(c0, c1);
  return out;
}

inline Tensor channel_concat(const Tensor& a, const Tensor& b) {
  if (a.batch != b.batch || a.h != b.h || a.w != b.w)
    throw std::invalid_argument("channel_concat: spatial shape mismatch");
  Tensor out(a.batch, a.h, a.w, a.c + b.c);
  out.data.set_col_block(0, a.data);
  out.data.set_col_block(a.c, b.data);
  return out;
}

/// im2col for a 3×3 kernel with zero "same" padding. Output row layout per
/// output pixel: (ky, kx) patches each carrying cin channels.
inline Matrix im2col3x3(const Tensor& x, std::size_t stride) {
  if (x.h % stride != 0 || x.w % stride != 0)
    throw std::invalid_argument("im2col3x3: stride must divide the spatial size");
  const std::size_t oh = x.h / stride, ow = x.w / stride;
  Matrix col(x.batch * oh * ow, 9 * x.c);
  const std::size_t cin = x.c;
  for (std::size_t b = 0; b < x.batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double* dst = col.row_ptr((b * oh + oy) * ow + ox);
        for (int ky = -1; ky <= 1; ++ky) {
          const long iy = static_cast<long>(oy * stride) + ky;
          for (int kx = -1; kx <= 1; ++kx) {
            const long ix = static_cast<long>(ox * stride) + kx;
            if (iy >= 0 && iy < static_cast<long>(x.h) && ix >= 0 && ix < static_cast<long>(x.w)) {
              const double* src = x.data.row_ptr(
                  x.pixel_row(b, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)));
              std::memcpy(dst, src, cin * sizeof(double));
            } else {
              std::memset(dst, 0, cin * sizeof(double));
            }
            dst += cin;
          }
        }
      }
    }
  }
  return col;
}

/// Scatter-add transpose of im2col3x3.
inline void col2im3x3(const Matrix& dcol, Tensor& dx, std::size_t stride) {
  const std::size_t oh = dx.h / stride, ow = dx.w / stride;
  const std::size_t cin = dx.c;
  for (std::size_t b = 0; b < dx.batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double* src = dcol.row_ptr((b * oh + oy) * ow + ox);
        for (int ky = -1; ky <= 1; ++ky) {
          const long iy = static_cast<long>(oy * stride) + ky;
          for (int kx = -1; kx <= 1; ++kx) {
            const long ix = static_cast<long>(ox * stride) + kx;
            if (iy >= 0 && iy < static_cast<long>(dx.h) && ix >= 0 && ix < static_cast<long>(dx.w)) {
              double* dst = dx.data.row_ptr(
                  dx.pixel_row(b, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)));
              for (std::size_t ch = 0; ch < cin; ++ch) dst[ch] += src[ch];
            }
            src += cin;
          }
        }
      }
    }
  }
}

/// 3×3 convolution, zero "same" padding. Weights are (9·cin)×cout, bias 1×cout.
struct Conv3x3Cache {
  Matrix col;  // im2col of the input, kept for the backward pass
  std::size_t batch = 0, h = 0, w = 0, cin = 0;
  std::size_t stride = 1;
};

inline Tensor conv3x3_forward(const Tensor& x, const Matrix& weights, const Matrix& bias,
                              std::size_t stride, Conv3x3Cache* cache = nullptr) {
  if (weights.rows() != 9 * x.c) throw std::invalid_argument("conv3x3: weight shape mismatch");
  const std::size_t cout = weights.cols();
  Matrix col = im2col3x3(x, stride);
  Tensor out(x.batch, x.h / stride, x.w / stride, cout);
  out.data.map().noalias() = col.map() * weights.map();
  out.data.map().rowwise() += bias.map().row(0);
  if (cache) {
    cache->col = std::move(col);
    cache->batch = x.batch;
    cache->h = x.h;
    cache->w = x.w;
    cache->cin = x.c;
    cache->stride = stride;
  }
  return out;
}

/// Returns dx; accumulates dW and db.
inline Tensor conv3x3_backward(const Tensor& dout, const Conv3x3Cache& cache, const Matrix& weights,
                               Matrix& dweights, Matrix& dbias) {
  dweights.map().noalias() += cache.col.map().transpose() * dout.data.map();
  dbias.map().row(0) += dout.data.map().colwise().sum();
  Matrix dcol(cache.col.rows(), cache.col.cols());
  dcol.map().noalias() = dout.data.map() * weights.map().transpose();
  Tensor dx(cache.batch, cache.h, cache.w, cache.cin);
  col2im3x3(dcol, dx, cache.stride);
  return dx;
}

/// 1×1 convolution: per-pixel linear map over channels.
inline Tensor conv1x1_forward(const Tensor& x, const Matrix& weights, const Matrix& bias) {
  if (weights.rows() != x.c) throw std::invalid_argument("conv1x1: weight shape mismatch");
  Tensor out(x.batch, x.h, x.w, weights.cols());
  out.data.map().noalias() = x.data.map() * weights.map();
  out.data.map().rowwise() += bias.map().row(0);
  return out;
}

inline Tensor conv1x1_backward(const Tensor& dout, const Tensor& x, const Matrix& weights,
                               Matrix& dweights, Matrix& dbias) {
  dweights.map().noalias() += x.data.map().transpose() * dout.data.map();
  dbias.map().row(0) += dout.data.map().colwise().sum();
  Tensor dx(x.batch, x.h, x.w, x.c);
  dx.data.map().noalias() = dout.data.map() * weights.map().transpose();
  return dx;
}

inline Tensor relu_forward(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    if (out.data[i] < 0.0) out.data[i] = 0.0;
  return out;
}

inline Tensor relu_backward(const Tensor& dout, const Tensor& x) {
  Tensor dx = dout;
  for (std::size_t i = 0; i < dx.data.size(); ++i)
    if (x.data[i] <= 0.0) dx.data[i] = 0.0;
  return dx;
}

inline Tensor sigmoid_forward(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = 1.0 / (1.0 + std::exp(-out.data[i]));
  return out;
}

/// Non-overlapping r×r average pooling.
inline Tensor avgpool_forward(const Tensor& x, std::size_t r) {
  if (x.h % r != 0 || x.w % r != 0)
    throw std::invalid_argument("avgpool: rate must divide the spatial size");
  Tensor out(x.batch, x.h / r, x.w / r, x.c);
  const double inv = 1.0 / static_cast<double>(r * r);
  for (std::size_t b = 0; b < x.batch; ++b)
    for (std::size_t oy = 0; oy < out.h; ++oy)
      for (std::size_t ox = 0; ox < out.w; ++ox) {
        double* dst = out.data.row_ptr(out.pixel_row(b, oy, ox));
        for (std::size_t dy = 0; dy < r; ++dy)
          for (std::size_t dx = 0; dx < r; ++dx) {
            const double* src = x.data.row_ptr(x.pixel_row(b, oy * r + dy, ox * r + dx));
            for (std::size_t ch = 0; ch < x.c; ++ch) dst[ch] += src[ch];
          }
        for (std::size_t ch = 0; ch < x.c; ++ch) dst[ch] *= inv;
      }
  return out;
}

inline Tensor avgpool_backward(const Tensor& dout, std::size_t r) {
  Tensor dx(dout.batch, dout.h * r, dout.w * r, dout.c);
  const double inv = 1.0 / static_cast<double>(r * r);
  for (std::size_t b = 0; b < dout.batch; ++b)
    for (std::size_t oy = 0; oy < dout.h; ++oy)
      for (std::size_t ox = 0; ox < dout.w; ++ox) {
        const double* src = dout.data.row_ptr(dout.pixel_row(b, oy, ox));
        for (std::size_t dy = 0; dy < r; ++dy)
          for (std::size_t dx_ = 0; dx_ < r; ++dx_) {
            double* dst = dx.data.row_ptr(dx.pixel_row(b, oy * r + dy, ox * r + dx_));
            for (std::size_t ch = 0; ch < dout.c; ++ch) dst[ch] = src[ch] * inv;
          }
      }
  return dx;
}

/// Nearest-neighbor ×r upsampling.
inline Tensor upsample_forward(const Tensor& x, std::size_t r) {
  Tensor out(x.batch, x.h * r, x.w * r, x.c);
  for (std::size_t b = 0; b < x.batch; ++b)
    for (std::size_t y = 0; y < out.h; ++y)
      for (std::size_t xx = 0; xx < out.w; ++xx) {
        const double* src = x.data.row_ptr(x.pixel_row(b, y / r, xx / r));
        double* dst = out.data.row_ptr(out.pixel_row(b, y, xx));
        std::memcpy(dst, src, x.c * sizeof(double));
      }
  return out;
}

inline Tensor upsample_backward(const Tensor& dout, std::size_t r) {
  Tensor dx(dout.batch, dout.h / r, dout.w / r, dout.c);
  for (std::size_t b = 0; b < dout.batch; ++b)
    for (std::size_t y = 0; y < dout.h; ++y)
      for (std::size_t xx = 0; xx < dout.w; ++xx) {
        const double* src = dout.data.row_ptr(dout.pixel_row(b, y, xx));
        double* dst = dx.data.row_ptr(dx.pixel_row(b, y / r, xx / r));
        for (std::size_t ch = 0; ch < dout.c; ++ch) dst[ch] += src[ch];
      }
  return dx;
}

/// Global average pool: one channel vector per image, batch×c.
inline Matrix global_avgpool_forward(const Tensor& x) {
  Matrix out(x.batch, x.c);
  const double inv = 1.0 / static_cast<double>(x.h * x.w);
  for (std::size_t b = 0; b < x.batch; ++b)
    for (std::size_t y = 0; y < x.h; ++y)
      for (std::size_t xx = 0; xx < x.w; ++xx) {
        const double* src = x.data.row_ptr(x.pixel_row(b, y, xx));
        for (std::size_t ch = 0; ch < x.c; ++ch) out(b, ch) += src[ch];
      }
  out *= inv;
  return out;
}

inline Tensor global_avgpool_backward(const Matrix& dout, std::size_t h, std::size_t w) {
  Tensor dx(dout.rows(), h, w, dout.cols());
  const double inv = 1.0 / static_cast<double>(h * w);
  for (std::size_t b = 0; b < dx.batch; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        double* dst = dx.data.row_ptr(dx.pixel_row(b, y, xx));
        for (std::size_t ch = 0; ch < dx.c; ++ch) dst[ch] = dout(b, ch) * inv;
      }
  return dx;
}

}  // namespace armcast
