#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "armcast/matrix.hpp"
#include "armcast/rng.hpp"

namespace armcast {

enum class RnnCell { kLstm, kGru };

inline std::string to_string(RnnCell c) { return c == RnnCell::kLstm ? "lstm" : "gru"; }

inline RnnCell rnn_cell_from_string(const std::string& s) {
  if (s == "lstm") return RnnCell::kLstm;
  if (s == "gru") return RnnCell::kGru;
  throw std::invalid_argument("unknown RNN cell '" + s + "'");
}

namespace detail {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Matrix glorot(Rng& rng, std::size_t rows, std::size_t cols) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return rng.uniform_matrix(rows, cols, -bound, bound);
}

inline Matrix colsum(const Matrix& m) {
  Matrix out(1, m.cols());
  out.map() = m.map().colwise().sum();
  return out;
}
}  // namespace detail

/// LSTM cell parameters; gate columns packed [i | f | g | o], each H wide.
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  Matrix w;  // input_dim × 4H
  Matrix u;  // H × 4H
  Matrix b;  // 1 × 4H

  static LstmParams init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    p.w = detail::glorot(rng, input_dim, 4 * hidden);
    p.u = detail::glorot(rng, hidden, 4 * hidden);
    p.b = Matrix(1, 4 * hidden);
    return p;
  }
};

struct LstmCache {
  Matrix x, h_prev, c_prev;
  Matrix i, f, g, o;  // post-activation gates, B×H each
  Matrix tanh_c;      // tanh(c'), B×H
};

/// Standard LSTM gate equations over a batch: x B×in, h/c B×H → (h', c').
inline std::pair<Matrix, Matrix> lstm_cell_forward(const LstmParams& p, const Matrix& x,
                                                   const Matrix& h, const Matrix& c,
                                                   LstmCache* cache = nullptr) {
  const std::size_t bsz = x.rows(), hd = p.hidden;
  if (x.cols() != p.input_dim || h.rows() != bsz || h.cols() != hd || !c.same_shape(h))
    throw std::invalid_argument("lstm_cell_forward: shape mismatch");

  Matrix a(bsz, 4 * hd);
  a.map().noalias() = x.map() * p.w.map();
  a.map().noalias() += h.map() * p.u.map();
  a.map().rowwise() += p.b.map().row(0);

  Matrix gi(bsz, hd), gf(bsz, hd), gg(bsz, hd), go(bsz, hd);
  Matrix c_new(bsz, hd), h_new(bsz, hd), tc(bsz, hd);
  for (std::size_t r = 0; r < bsz; ++r)
    for (std::size_t j = 0; j < hd; ++j) {
      const double* ar = a.row_ptr(r);
      gi(r, j) = detail::sigmoid(ar[j]);
      gf(r, j) = detail::sigmoid(ar[hd + j]);
      gg(r, j) = std::tanh(ar[2 * hd + j]);
      go(r, j) = detail::sigmoid(ar[3 * hd + j]);
      c_new(r, j) = gf(r, j) * c(r, j) + gi(r, j) * gg(r, j);
      tc(r, j) = std::tanh(c_new(r, j));
      h_new(r, j) = go(r, j) * tc(r, j);
    }

  if (cache) {
    cache->x = x;
    cache->h_prev = h;
    cache->c_prev = c;
    cache->i = gi;
    cache->f = gf;
    cache->g = gg;
    cache->o = go;
    cache->tanh_c = tc;
  }
  return {std::move(h_new), std::move(c_new)};
}

struct LstmGrads {
  Matrix w, u, b;

  static LstmGrads zeros_like(const LstmParams& p) {
    return {Matrix(p.w.rows(), p.w.cols()), Matrix(p.u.rows(), p.u.cols()),
            Matrix(p.b.rows(), p.b.cols())};
  }
};

/// Backprop through one LSTM step. dh/dc are gradients w.r.t. h'/c'; returns
/// (dx, dh_prev, dc_prev) and accumulates parameter gradients into g.
inline void lstm_cell_backward(const LstmParams& p, const LstmCache& cache, const Matrix& dh,
                               const Matrix& dc, LstmGrads& g, Matrix& dx, Matrix& dh_prev,
                               Matrix& dc_prev) {
  const std::size_t bsz = dh.rows(), hd = p.hidden;
  Matrix da(bsz, 4 * hd);
  dc_prev = Matrix(bsz, hd);
  for (std::size_t r = 0; r < bsz; ++r)
    for (std::size_t j = 0; j < hd; ++j) {
      const double tc = cache.tanh_c(r, j);
      const double dct = dc(r, j) + dh(r, j) * cache.o(r, j) * (1.0 - tc * tc);
      const double i = cache.i(r, j), f = cache.f(r, j), gg = cache.g(r, j), o = cache.o(r, j);
      da(r, j) = dct * gg * i * (1.0 - i);
      da(r, hd + j) = dct * cache.c_prev(r, j) * f * (1.0 - f);
      da(r, 2 * hd + j) = dct * i * (1.0 - gg * gg);
      da(r, 3 * hd + j) = dh(r, j) * tc * o * (1.0 - o);
      dc_prev(r, j) = dct * f;
    }

  g.w.map().noalias() += cache.x.map().transpose() * da.map();
  g.u.map().noalias() += cache.h_prev.map().transpose() * da.map();
  g.b += detail::colsum(da);
  dx = Matrix(bsz, p.input_dim);
  dx.map().noalias() = da.map() * p.w.map().transpose();
  dh_prev = Matrix(bsz, hd);
  dh_prev.map().noalias() = da.map() * p.u.map().transpose();
}

/// GRU cell parameters; update/reset gates packed [z | r], candidate separate.
struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  Matrix wzr;  // input_dim × 2H
  Matrix uzr;  // H × 2H
  Matrix bzr;  // 1 × 2H
  Matrix wh;   // input_dim × H
  Matrix uh;   // H × H
  Matrix bh;   // 1 × H

  static GruParams init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
    GruParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    p.wzr = detail::glorot(rng, input_dim, 2 * hidden);
    p.uzr = detail::glorot(rng, hidden, 2 * hidden);
    p.bzr = Matrix(1, 2 * hidden);
    p.wh = detail::glorot(rng, input_dim, hidden);
    p.uh = detail::glorot(rng, hidden, hidden);
    p.bh = Matrix(1, hidden);
    return p;
  }
};

struct GruCache {
  Matrix x, h_prev;
  Matrix z, r;       // post-activation gates
  Matrix rh;         // r ⊙ h_prev
  Matrix h_cand;     // tanh candidate h̃
};

/// GRU forward: z/r sigmoid gates, tanh candidate, h' = (1−z)⊙h + z⊙h̃.
inline Matrix gru_cell_forward(const GruParams& p, const Matrix& x, const Matrix& h,
                               GruCache* cache = nullptr) {
  const std::size_t bsz = x.rows(), hd = p.hidden;
  if (x.cols() != p.input_dim || h.rows() != bsz || h.cols() != hd)
    throw std::invalid_argument("gru_cell_forward: shape mismatch");

  Matrix azr(bsz, 2 * hd);
  azr.map().noalias() = x.map() * p.wzr.map();
  azr.map().noalias() += h.map() * p.uzr.map();
  azr.map().rowwise() += p.bzr.map().row(0);

  Matrix z(bsz, hd), r(bsz, hd), rh(bsz, hd);
  for (std::size_t i = 0; i < bsz; ++i)
    for (std::size_t j = 0; j < hd; ++j) {
      z(i, j) = detail::sigmoid(azr(i, j));
      r(i, j) = detail::sigmoid(azr(i, hd + j));
      rh(i, j) = r(i, j) * h(i, j);
    }

  Matrix ah(bsz, hd);
  ah.map().noalias() = x.map() * p.wh.map();
  ah.map().noalias() += rh.map() * p.uh.map();
  ah.map().rowwise() += p.bh.map().row(0);

  Matrix cand(bsz, hd), h_new(bsz, hd);
  for (std::size_t i = 0; i < bsz; ++i)
    for (std::size_t j = 0; j < hd; ++j) {
      cand(i, j) = std::tanh(ah(i, j));
      h_new(i, j) = (1.0 - z(i, j)) * h(i, j) + z(i, j) * cand(i, j);
    }

  if (cache) {
    cache->x = x;
    cache->h_prev = h;
    cache->z = z;
    cache->r = r;
    cache->rh = rh;
    cache->h_cand = cand;
  }
  return h_new;
}

struct GruGrads {
  Matrix wzr, uzr, bzr, wh, uh, bh;

  static GruGrads zeros_like(const GruParams& p) {
    return {Matrix(p.wzr.rows(), p.wzr.cols()), Matrix(p.uzr.rows(), p.uzr.cols()),
            Matrix(p.bzr.rows(), p.bzr.cols()), Matrix(p.wh.rows(), p.wh.cols()),
            Matrix(p.uh.rows(), p.uh.cols()),   Matrix(p.bh.rows(), p.bh.cols())};
  }
};

inline void gru_cell_backward(const GruParams& p, const GruCache& cache, const Matrix& dh,
                              GruGrads& g, Matrix& dx, Matrix& dh_prev) {
  const std::size_t bsz = dh.rows(), hd = p.hidden;

  Matrix dah(bsz, hd), dzr(bsz, 2 * hd);
  dh_prev = Matrix(bsz, hd);
  // Candidate path first: h' = (1−z)h + z·h̃.
  for (std::size_t i = 0; i < bsz; ++i)
    for (std::size_t j = 0; j < hd; ++j) {
      const double z = cache.z(i, j), cand = cache.h_cand(i, j);
      const double dcand = dh(i, j) * z;
      dah(i, j) = dcand * (1.0 - cand * cand);
      dzr(i, j) = dh(i, j) * (cand - cache.h_prev(i, j)) * z * (1.0 - z);
      dh_prev(i, j) = dh(i, j) * (1.0 - z);
    }

  g.wh.map().noalias() += cache.x.map().transpose() * dah.map();
  g.uh.map().noalias() += cache.rh.map().transpose() * dah.map();
  g.bh += detail::colsum(dah);

  Matrix drh(bsz, hd);
  drh.map().noalias() = dah.map() * p.uh.map().transpose();
  for (std::size_t i = 0; i < bsz; ++i)
    for (std::size_t j = 0; j < hd; ++j) {
      const double r = cache.r(i, j);
      dh_prev(i, j) += drh(i, j) * r;
      dzr(i, hd + j) = drh(i, j) * cache.h_prev(i, j) * r * (1.0 - r);
    }

  g.wzr.map().noalias() += cache.x.map().transpose() * dzr.map();
  g.uzr.map().noalias() += cache.h_prev.map().transpose() * dzr.map();
  g.bzr += detail::colsum(dzr);

  dx = Matrix(bsz, p.input_dim);
  dx.map().noalias() = dzr.map() * p.wzr.map().transpose();
  dx.map().noalias() += dah.map() * p.wh.map().transpose();
  dh_prev.map().noalias() += dzr.map() * p.uzr.map().transpose();
}

/// One recurrent layer holding parameters for whichever cell kind is active.
struct RnnLayer {
  RnnCell cell = RnnCell::kLstm;
  LstmParams lstm;
  GruParams gru;

  static RnnLayer init(RnnCell cell, std::size_t input_dim, std::size_t hidden, Rng& rng) {
    RnnLayer l;
    l.cell = cell;
    if (cell == RnnCell::kLstm)
      l.lstm = LstmParams::init(input_dim, hidden, rng);
    else
      l.gru = GruParams::init(input_dim, hidden, rng);
    return l;
  }

  std::size_t hidden() const { return cell == RnnCell::kLstm ? lstm.hidden : gru.hidden; }
  std::size_t input_dim() const { return cell == RnnCell::kLstm ? lstm.input_dim : gru.input_dim; }

  std::vector<std::pair<std::string, Matrix*>> params(const std::string& prefix) {
    if (cell == RnnCell::kLstm)
      return {{prefix + ".w", &lstm.w}, {prefix + ".u", &lstm.u}, {prefix + ".b", &lstm.b}};
    return {{prefix + ".wzr", &gru.wzr}, {prefix + ".uzr", &gru.uzr}, {prefix + ".bzr", &gru.bzr},
            {prefix + ".wh", &gru.wh},   {prefix + ".uh", &gru.uh},   {prefix + ".bh", &gru.bh}};
  }
};

struct RnnLayerGrads {
  LstmGrads lstm;
  GruGrads gru;

  static RnnLayerGrads zeros_like(const RnnLayer& l) {
    RnnLayerGrads g;
    if (l.cell == RnnCell::kLstm)
      g.lstm = LstmGrads::zeros_like(l.lstm);
    else
      g.gru = GruGrads::zeros_like(l.gru);
    return g;
  }

  std::vector<Matrix*> list(const RnnLayer& l) {
    if (l.cell == RnnCell::kLstm) return {&lstm.w, &lstm.u, &lstm.b};
    return {&gru.wzr, &gru.uzr, &gru.bzr, &gru.wh, &gru.uh, &gru.bh};
  }
};

struct RnnStepCache {
  LstmCache lstm;
  GruCache gru;
};

struct RnnState {
  Matrix h;
  Matrix c;  // unused for GRU

  static RnnState zeros(std::size_t batch, std::size_t hidden) {
    return {Matrix(batch, hidden), Matrix(batch, hidden)};
  }
};

inline RnnState rnn_step_forward(const RnnLayer& l, const Matrix& x, const RnnState& s,
                                 RnnStepCache* cache = nullptr) {
  if (l.cell == RnnCell::kLstm) {
    auto [h, c] = lstm_cell_forward(l.lstm, x, s.h, s.c, cache ? &cache->lstm : nullptr);
    return {std::move(h), std::move(c)};
  }
  RnnState out;
  out.h = gru_cell_forward(l.gru, x, s.h, cache ? &cache->gru : nullptr);
  out.c = Matrix(x.rows(), l.gru.hidden);
  return out;
}

/// dh/dc: gradients w.r.t. the step's output state; returns gradients w.r.t.
/// input and previous state.
inline void rnn_step_backward(const RnnLayer& l, const RnnStepCache& cache, const Matrix& dh,
                              const Matrix& dc, RnnLayerGrads& g, Matrix& dx, RnnState& dprev) {
  if (l.cell == RnnCell::kLstm) {
    lstm_cell_backward(l.lstm, cache.lstm, dh, dc, g.lstm, dx, dprev.h, dprev.c);
  } else {
    gru_cell_backward(l.gru, cache.gru, dh, g.gru, dx, dprev.h);
    dprev.c = Matrix(dh.rows(), l.gru.hidden);
  }
}

}  // namespace armcast
