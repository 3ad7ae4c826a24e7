#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "armcast/adam.hpp"
#include "armcast/errors.hpp"
#include "armcast/metrics.hpp"
#include "armcast/pose.hpp"
#include "armcast/rng.hpp"
#include "armcast/rnn.hpp"

namespace armcast {

/// Double-stacked recurrent encoder-decoder with repeat-vector context and a
/// time-distributed linear head: (n×16) past window → (f×16) future window.
struct ForecastModel {
  RnnCell cell = RnnCell::kLstm;
  std::size_t hidden = 64;
  std::size_t past_n = 1;
  std::size_t future_f = 1;
  RnnLayer enc1, enc2, dec1, dec2;
  Matrix proj_w;  // hidden × 16, zero-initialized
  Matrix proj_b;  // 1 × 16
  Matrix mean;    // 1 × 16 per-coordinate standardization
  Matrix stddev;  // 1 × 16, entries > 0

  static ForecastModel init(RnnCell cell, std::size_t n, std::size_t f, std::size_t hidden,
                            std::uint64_t seed) {
    if (n < 1 || f < 1 || hidden < 1) throw std::invalid_argument("ForecastModel: bad dimensions");
    ForecastModel m;
    m.cell = cell;
    m.hidden = hidden;
    m.past_n = n;
    m.future_f = f;
    Rng rng(seed);
    m.enc1 = RnnLayer::init(cell, kPoseDim, hidden, rng);
    m.enc2 = RnnLayer::init(cell, hidden, hidden, rng);
    m.dec1 = RnnLayer::init(cell, hidden, hidden, rng);
    m.dec2 = RnnLayer::init(cell, hidden, hidden, rng);
    m.proj_w = Matrix(hidden, kPoseDim);
    m.proj_b = Matrix(1, kPoseDim);
    m.mean = Matrix(1, kPoseDim, 0.0);
    m.stddev = Matrix(1, kPoseDim, 1.0);
    return m;
  }

  std::vector<std::pair<std::string, Matrix*>> params() {
    std::vector<std::pair<std::string, Matrix*>> out;
    for (auto& kv : enc1.params("enc1")) out.push_back(kv);
    for (auto& kv : enc2.params("enc2")) out.push_back(kv);
    for (auto& kv : dec1.params("dec1")) out.push_back(kv);
    for (auto& kv : dec2.params("dec2")) out.push_back(kv);
    out.push_back({"proj.w", &proj_w});
    out.push_back({"proj.b", &proj_b});
    return out;
  }
};

struct ForecastGrads {
  RnnLayerGrads enc1, enc2, dec1, dec2;
  Matrix proj_w, proj_b;

  static ForecastGrads zeros_like(const ForecastModel& m) {
    ForecastGrads g;
    g.enc1 = RnnLayerGrads::zeros_like(m.enc1);
    g.enc2 = RnnLayerGrads::zeros_like(m.enc2);
    g.dec1 = RnnLayerGrads::zeros_like(m.dec1);
    g.dec2 = RnnLayerGrads::zeros_like(m.dec2);
    g.proj_w = Matrix(m.proj_w.rows(), m.proj_w.cols());
    g.proj_b = Matrix(m.proj_b.rows(), m.proj_b.cols());
    return g;
  }

  /// Aligned with ForecastModel::params() order.
  std::vector<Matrix*> param_list(ForecastModel& m) {
    std::vector<Matrix*> out;
    for (Matrix* p : enc1.list(m.enc1)) out.push_back(p);
    for (Matrix* p : enc2.list(m.enc2)) out.push_back(p);
    for (Matrix* p : dec1.list(m.dec1)) out.push_back(p);
    for (Matrix* p : dec2.list(m.dec2)) out.push_back(p);
    out.push_back(&proj_w);
    out.push_back(&proj_b);
    return out;
  }
};

struct EncDecCache {
  std::size_t batch = 0;
  std::vector<RnnStepCache> enc1_steps, enc2_steps;  // n each
  std::vector<RnnStepCache> dec1_steps, dec2_steps;  // f each
  std::vector<Matrix> dec2_h;                        // f decoder outputs, B×H
  Matrix context;                                    // B×H
};

namespace detail {

inline Matrix standardize(const ForecastModel& m, const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c)
      out(r, c) = (x(r, c) - m.mean(0, c)) / m.stddev(0, c);
  return out;
}

inline Matrix destandardize(const ForecastModel& m, const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c)
      out(r, c) = x(r, c) * m.stddev(0, c) + m.mean(0, c);
  return out;
}

}  // namespace detail

/// Batched forward pass in standardized units. `past` holds n time steps,
/// each B×16 and already standardized; returns f steps of B×16 standardized
/// predictions. Pass a cache to enable backprop.
inline std::vector<Matrix> encdec_forward_std(const ForecastModel& m,
                                              const std::vector<Matrix>& past,
                                              EncDecCache* cache = nullptr) {
  if (past.size() != m.past_n) throw std::invalid_argument("encdec_forward: wrong past length");
  const std::size_t bsz = past[0].rows();
  if (cache) {
    cache->batch = bsz;
    cache->enc1_steps.resize(m.past_n);
    cache->enc2_steps.resize(m.past_n);
    cache->dec1_steps.resize(m.future_f);
    cache->dec2_steps.resize(m.future_f);
    cache->dec2_h.resize(m.future_f);
  }

  RnnState s1 = RnnState::zeros(bsz, m.hidden);
  RnnState s2 = RnnState::zeros(bsz, m.hidden);
  for (std::size_t t = 0; t < m.past_n; ++t) {
    if (past[t].rows() != bsz || past[t].cols() != kPoseDim)
      throw std::invalid_argument("encdec_forward: bad step shape");
    s1 = rnn_step_forward(m.enc1, past[t], s1, cache ? &cache->enc1_steps[t] : nullptr);
    s2 = rnn_step_forward(m.enc2, s1.h, s2, cache ? &cache->enc2_steps[t] : nullptr);
  }

  // Context = encoder layer-2 final hidden state, repeated f times; decoder
  // layers start from the matching encoder layer's final state (copy arrows).
  const Matrix context = s2.h;
  if (cache) cache->context = context;
  RnnState d1 = s1;
  RnnState d2 = s2;
  std::vector<Matrix> out(m.future_f);
  for (std::size_t t = 0; t < m.future_f; ++t) {
    d1 = rnn_step_forward(m.dec1, context, d1, cache ? &cache->dec1_steps[t] : nullptr);
    d2 = rnn_step_forward(m.dec2, d1.h, d2, cache ? &cache->dec2_steps[t] : nullptr);
    if (cache) cache->dec2_h[t] = d2.h;
    Matrix y(bsz, kPoseDim);
    y.map().noalias() = d2.h.map() * m.proj_w.map();
    y.map().rowwise() += m.proj_b.map().row(0);
    out[t] = std::move(y);
  }
  return out;
}

/// Backprop the full encoder-decoder given d(loss)/d(output step) in
/// standardized units; accumulates into g.
inline void encdec_backward_std(const ForecastModel& m, const EncDecCache& cache,
                                const std::vector<Matrix>& dout, ForecastGrads& g) {
  if (dout.size() != m.future_f) throw std::invalid_argument("encdec_backward: wrong grad length");
  const std::size_t bsz = cache.batch;

  RnnState dd1{Matrix(bsz, m.hidden), Matrix(bsz, m.hidden)};
  RnnState dd2{Matrix(bsz, m.hidden), Matrix(bsz, m.hidden)};
  Matrix dcontext(bsz, m.hidden);

  for (std::size_t t = m.future_f; t-- > 0;) {
    // Projection head.
    g.proj_w.map().noalias() += cache.dec2_h[t].map().transpose() * dout[t].map();
    g.proj_b.map() += dout[t].map().colwise().sum();
    Matrix dh2 = dd2.h;
    dh2.map().noalias() += dout[t].map() * m.proj_w.map().transpose();

    Matrix dx2;
    RnnState dprev2;
    rnn_step_backward(m.dec2, cache.dec2_steps[t], dh2, dd2.c, g.dec2, dx2, dprev2);
    dd2 = std::move(dprev2);

    Matrix dh1 = dd1.h;
    dh1 += dx2;
    Matrix dx1;
    RnnState dprev1;
    rnn_step_backward(m.dec1, cache.dec1_steps[t], dh1, dd1.c, g.dec1, dx1, dprev1);
    dd1 = std::move(dprev1);
    dcontext += dx1;
  }

  // Decoder initial states came from encoder finals; context from enc2's
  // final hidden state.
  RnnState de2 = dd2;
  de2.h += dcontext;
  RnnState de1 = dd1;

  for (std::size_t t = m.past_n; t-- > 0;) {
    Matrix dseq1;
    RnnState dprev2;
    rnn_step_backward(m.enc2, cache.enc2_steps[t], de2.h, de2.c, g.enc2, dseq1, dprev2);
    de2 = std::move(dprev2);

    Matrix dh1 = de1.h;
    dh1 += dseq1;
    Matrix dx;
    RnnState dprev1;
    rnn_step_backward(m.enc1, cache.enc1_steps[t], dh1, de1.c, g.enc1, dx, dprev1);
    de1 = std::move(dprev1);
  }
}

/// Single-window prediction in pixel units: past n×16 → future f×16.
inline Matrix encdec_forward(const ForecastModel& m, const Matrix& past) {
  if (past.rows() != m.past_n || past.cols() != kPoseDim)
    throw std::invalid_argument("encdec_forward: past must be n×16");
  Matrix ps = detail::standardize(m, past);
  std::vector<Matrix> steps(m.past_n);
  for (std::size_t t = 0; t < m.past_n; ++t) steps[t] = ps.row(t);
  std::vector<Matrix> out = encdec_forward_std(m, steps);
  Matrix y(m.future_f, kPoseDim);
  for (std::size_t t = 0; t < m.future_f; ++t)
    for (std::size_t c = 0; c < kPoseDim; ++c) y(t, c) = out[t](0, c);
  return detail::destandardize(m, y);
}

struct WindowSample {
  std::size_t start = 0;  // series row index of the first past frame
  Matrix past;            // n×16, pixel units
  Matrix future;          // f×16, pixel units
};

/// Sliding windows over a T×16 series; future starts immediately after past.
inline std::vector<WindowSample> windowize(const Matrix& series, std::size_t n, std::size_t f,
                                           std::size_t stride = 1) {
  if (series.cols() != kPoseDim) throw std::invalid_argument("windowize: series must be T×16");
  if (n < 1 || f < 1 || stride < 1) throw std::invalid_argument("windowize: bad window spec");
  if (series.rows() < n + f) throw std::invalid_argument("windowize: series shorter than n + f");

  const std::size_t count = (series.rows() - n - f) / stride + 1;
  std::vector<WindowSample> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    WindowSample s;
    s.start = w * stride;
    s.past = Matrix(n, kPoseDim);
    s.future = Matrix(f, kPoseDim);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t c = 0; c < kPoseDim; ++c) s.past(t, c) = series(s.start + t, c);
    for (std::size_t t = 0; t < f; ++t)
      for (std::size_t c = 0; c < kPoseDim; ++c) s.future(t, c) = series(s.start + n + t, c);
    out.push_back(std::move(s));
  }
  return out;
}

struct ForecastHyper {
  std::size_t epochs = 500;
  double lr = 1e-4;
  std::size_t batch = 256;  // larger (e.g. 4096) viable on bigger datasets
  std::size_t hidden = 64;
  std::size_t stride = 1;
  double val_fraction = 0.2;
  std::uint64_t seed = 1;
};

struct ForecastResult {
  ForecastModel model;
  double val_mse = 0.0;  // pixel² units
  double val_mae = 0.0;  // pixel units
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
};

namespace detail {

/// Gather time-step-major batch tensors from window samples.
inline void gather_batch(const std::vector<WindowSample>& samples,
                         const std::vector<std::size_t>& idx, std::size_t n, std::size_t f,
                         std::vector<Matrix>& past, std::vector<Matrix>& future) {
  const std::size_t bsz = idx.size();
  past.assign(n, Matrix(bsz, kPoseDim));
  future.assign(f, Matrix(bsz, kPoseDim));
  for (std::size_t b = 0; b < bsz; ++b) {
    const WindowSample& s = samples[idx[b]];
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t c = 0; c < kPoseDim; ++c) past[t](b, c) = s.past(t, c);
    for (std::size_t t = 0; t < f; ++t)
      for (std::size_t c = 0; c < kPoseDim; ++c) future[t](b, c) = s.future(t, c);
  }
}

}  // namespace detail

/// Train the encoder-decoder on a pose series. Chronological 80/20 split of
/// the windows, standardized MSE loss, Adam with global-norm clipping at 5.0;
/// validation metrics reported in pixel units.
inline ForecastResult train_forecast(const Matrix& series, RnnCell cell, std::size_t n,
                                     std::size_t f, const ForecastHyper& hyper) {
  if (series.rows() < n + f + 1)
    throw std::invalid_argument("train_forecast: series length must be at least n + f + 1");

  std::vector<WindowSample> windows = windowize(series, n, f, hyper.stride);
  std::size_t n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(windows.size()) * (1.0 - hyper.val_fraction)));
  n_train = std::clamp<std::size_t>(n_train, 1, windows.size() - 1);

  ForecastResult res;
  res.model = ForecastModel::init(cell, n, f, hyper.hidden, hyper.seed);
  ForecastModel& m = res.model;
  res.train_windows = n_train;
  res.val_windows = windows.size() - n_train;

  // Standardization stats over the series rows covered by training windows.
  const std::size_t train_rows = windows[n_train - 1].start + n + f;
  for (std::size_t c = 0; c < kPoseDim; ++c) {
    double mu = 0.0;
    for (std::size_t r = 0; r < train_rows; ++r) mu += series(r, c);
    mu /= static_cast<double>(train_rows);
    double var = 0.0;
    for (std::size_t r = 0; r < train_rows; ++r) {
      const double d = series(r, c) - mu;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(train_rows));
    m.mean(0, c) = mu;
    m.stddev(0, c) = sd < 1e-8 ? 1.0 : sd;
  }

  auto param_kv = m.params();
  std::vector<AdamState> adam;
  adam.reserve(param_kv.size());
  for (auto& kv : param_kv) adam.push_back(AdamState::for_params(*kv.second, hyper.lr));

  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
  Rng shuffle_rng(splitmix64_at(hyper.seed, 0x51));

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t off = 0; off < n_train; off += hyper.batch) {
      const std::size_t bsz = std::min(hyper.batch, n_train - off);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(off),
                                   order.begin() + static_cast<std::ptrdiff_t>(off + bsz));
      std::vector<Matrix> past, future;
      detail::gather_batch(windows, idx, n, f, past, future);
      for (auto& step : past) step = detail::standardize(m, step);
      for (auto& step : future) step = detail::standardize(m, step);

      EncDecCache cache;
      std::vector<Matrix> pred = encdec_forward_std(m, past, &cache);

      // Standardized MSE over all f×16 outputs; gradient 2(p−y)/count.
      const double count = static_cast<double>(bsz * f * kPoseDim);
      double loss = 0.0;
      std::vector<Matrix> dout(f);
      for (std::size_t t = 0; t < f; ++t) {
        dout[t] = Matrix(bsz, kPoseDim);
        for (std::size_t i = 0; i < pred[t].size(); ++i) {
          const double d = pred[t][i] - future[t][i];
          loss += d * d;
          dout[t][i] = 2.0 * d / count;
        }
      }
      loss /= count;
      if (!std::isfinite(loss)) throw NumericalError("train_forecast: non-finite loss");

      ForecastGrads grads = ForecastGrads::zeros_like(m);
      encdec_backward_std(m, cache, dout, grads);

      // Global gradient-norm clipping at 5.0.
      auto glist = grads.param_list(m);
      double sq = 0.0;
      for (Matrix* gm : glist) sq += gm->map().squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > 5.0) {
        const double scale = 5.0 / norm;
        for (Matrix* gm : glist) *gm *= scale;
      }
      for (std::size_t p = 0; p < glist.size(); ++p)
        adam_step(*param_kv[p].second, *glist[p], adam[p]);
    }
  }

  // Validation metrics in pixel units.
  std::vector<std::size_t> val_idx(windows.size() - n_train);
  for (std::size_t i = 0; i < val_idx.size(); ++i) val_idx[i] = n_train + i;
  std::vector<double> truth, predicted;
  truth.reserve(val_idx.size() * f * kPoseDim);
  predicted.reserve(val_idx.size() * f * kPoseDim);
  const std::size_t eval_batch = 512;
  for (std::size_t off = 0; off < val_idx.size(); off += eval_batch) {
    const std::size_t bsz = std::min(eval_batch, val_idx.size() - off);
    std::vector<std::size_t> idx(val_idx.begin() + static_cast<std::ptrdiff_t>(off),
                                 val_idx.begin() + static_cast<std::ptrdiff_t>(off + bsz));
    std::vector<Matrix> past, future;
    detail::gather_batch(windows, idx, n, f, past, future);
    std::vector<Matrix> past_std = past;
    for (auto& step : past_std) step = detail::standardize(m, step);
    std::vector<Matrix> pred = encdec_forward_std(m, past_std);
    for (std::size_t t = 0; t < f; ++t) {
      Matrix px = detail::destandardize(m, pred[t]);
      for (std::size_t i = 0; i < px.size(); ++i) {
        predicted.push_back(px[i]);
        truth.push_back(future[t][i]);
      }
    }
  }
  res.val_mse = mse(truth, predicted);
  res.val_mae = mae(truth, predicted);
  return res;
}

}  // namespace armcast
