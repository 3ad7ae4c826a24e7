#pragma once

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "armcast/backbone.hpp"
#include "armcast/linalg.hpp"
#include "armcast/metrics.hpp"
#include "armcast/pose.hpp"
#include "armcast/rng.hpp"

namespace armcast {

enum class ElmKernel { kLinear, kTanh, kRbf, kRbfL2 };

inline std::string to_string(ElmKernel k) {
  switch (k) {
    case ElmKernel::kLinear: return "linear";
    case ElmKernel::kTanh: return "tanh";
    case ElmKernel::kRbf: return "rbf";
    case ElmKernel::kRbfL2: return "rbf_l2";
  }
  throw std::logic_error("unreachable");
}

inline ElmKernel elm_kernel_from_string(const std::string& s) {
  if (s == "linear") return ElmKernel::kLinear;
  if (s == "tanh") return ElmKernel::kTanh;
  if (s == "rbf") return ElmKernel::kRbf;
  if (s == "rbf_l2") return ElmKernel::kRbfL2;
  throw std::invalid_argument("unknown ELM kernel '" + s + "'");
}

/// Extreme Learning Machine regression head: randomly drawn hidden layer,
/// output weights solved in one shot by (regularized) least squares.
struct ElmModel {
  ElmKernel kernel = ElmKernel::kRbfL2;
  std::size_t n_hidden = 1000;
  std::size_t input_dim = 0;
  Matrix weights;  // D×L (linear/tanh)
  Matrix bias;     // 1×L (linear/tanh)
  Matrix centers;  // L×D (rbf variants)
  Matrix widths;   // 1×L, γ > 0 (rbf variants)
  Matrix beta;     // L×16
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t backbone_hash = 0;

  bool is_rbf() const { return kernel == ElmKernel::kRbf || kernel == ElmKernel::kRbfL2; }
};

/// Hidden-layer activations H (N×L).
inline Matrix kernel_activation(const ElmModel& m, const Matrix& x) {
  if (x.cols() != m.input_dim) throw std::invalid_argument("kernel_activation: dimension mismatch");
  const std::size_t n = x.rows(), l = m.n_hidden;
  Matrix h(n, l);
  if (m.is_rbf()) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < l; ++j) {
        double d2 = 0.0;
        const double* xi = x.row_ptr(i);
        const double* aj = m.centers.row_ptr(j);
        for (std::size_t d = 0; d < m.input_dim; ++d) {
          const double diff = xi[d] - aj[d];
          d2 += diff * diff;
        }
        h(i, j) = std::exp(-m.widths(0, j) * d2);
      }
  } else {
    h.map().noalias() = x.map() * m.weights.map();
    h.map().rowwise() += m.bias.map().row(0);
    if (m.kernel == ElmKernel::kTanh)
      for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i]);
  }
  return h;
}

/// One-shot ELM training: seeded hidden parameters, then a single
/// least-squares solve for β. Linear/tanh weights are uniform ±1; RBF
/// centers are feature rows sampled without replacement (topped up with
/// uniform in-range draws when n_hidden > N), widths log-uniform in [0.1, 10]
/// relative to the mean squared feature-to-center distance.
inline ElmModel elm_train(const Matrix& features, const Matrix& targets, ElmKernel kernel,
                          std::size_t n_hidden, double lambda, std::uint64_t seed) {
  if (features.rows() != targets.rows()) throw std::invalid_argument("elm_train: row mismatch");
  if (features.rows() < 2) throw std::invalid_argument("elm_train: need at least 2 samples");
  if (n_hidden < 1) throw std::invalid_argument("elm_train: need at least 1 hidden unit");
  if (features.cols() == 0) throw std::invalid_argument("elm_train: zero-dimensional features");

  ElmModel m;
  m.kernel = kernel;
  m.n_hidden = n_hidden;
  m.input_dim = features.cols();
  m.lambda = lambda;
  m.seed = seed;

  Rng rng(seed);
  const std::size_t n = features.rows(), d = features.cols();
  if (m.is_rbf()) {
    m.centers = Matrix(n_hidden, d);
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    rng.shuffle(rows);
    // Per-dimension feature range for top-up draws.
    std::vector<double> lo(d), hi(d);
    for (std::size_t c = 0; c < d; ++c) {
      lo[c] = hi[c] = features(0, c);
      for (std::size_t r = 1; r < n; ++r) {
        lo[c] = std::min(lo[c], features(r, c));
        hi[c] = std::max(hi[c], features(r, c));
      }
    }
    for (std::size_t j = 0; j < n_hidden; ++j) {
      if (j < n) {
        for (std::size_t c = 0; c < d; ++c) m.centers(j, c) = features(rows[j], c);
      } else {
        for (std::size_t c = 0; c < d; ++c) m.centers(j, c) = rng.uniform(lo[c], hi[c]);
      }
    }
    // Scale calibration: γ is drawn log-uniform in [0.1, 10] relative to the
    // mean squared feature-to-center distance, so kernel responses stay
    // informative regardless of the feature space's natural scale. The mean
    // decomposes as E‖x‖² + E‖a‖² − 2⟨E x, E a⟩.
    double feat_sq = 0.0, cent_sq = 0.0;
    std::vector<double> feat_mean(d, 0.0), cent_mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        feat_sq += features(r, c) * features(r, c);
        feat_mean[c] += features(r, c);
      }
    for (std::size_t j = 0; j < n_hidden; ++j)
      for (std::size_t c = 0; c < d; ++c) {
        cent_sq += m.centers(j, c) * m.centers(j, c);
        cent_mean[c] += m.centers(j, c);
      }
    double scale = feat_sq / static_cast<double>(n) + cent_sq / static_cast<double>(n_hidden);
    for (std::size_t c = 0; c < d; ++c)
      scale -= 2.0 * (feat_mean[c] / static_cast<double>(n)) *
               (cent_mean[c] / static_cast<double>(n_hidden));
    if (!(scale > 1e-12)) scale = 1.0;  // degenerate (constant) feature cloud

    m.widths = Matrix(1, n_hidden);
    for (std::size_t j = 0; j < n_hidden; ++j)
      m.widths(0, j) = std::exp(rng.uniform(std::log(0.1), std::log(10.0))) / scale;
  } else {
    m.weights = rng.uniform_matrix(d, n_hidden, -1.0, 1.0);
    m.bias = rng.uniform_matrix(1, n_hidden, -1.0, 1.0);
  }

  Matrix h = kernel_activation(m, features);
  m.beta = solve_least_squares(h, targets, lambda);
  return m;
}

inline Matrix elm_predict(const ElmModel& m, const Matrix& features) {
  if (m.beta.empty()) throw std::invalid_argument("elm_predict: untrained model");
  return matmul(kernel_activation(m, features), m.beta);
}

struct SweepRecord {
  ElmKernel kernel = ElmKernel::kLinear;
  std::size_t n_hidden = 0;
  std::size_t fold = 0;
  double mse = 0.0;
  double mae = 0.0;
};

/// Cross-validated MSE per kernel × hidden-unit count; the neuron-sweep
/// curve data. Duplicate kernels are deduplicated with a warning.
inline std::vector<SweepRecord> neuron_sweep(const Matrix& features, const Matrix& targets,
                                             std::vector<ElmKernel> kernels, std::size_t min_n,
                                             std::size_t max_n, std::size_t step,
                                             std::size_t folds, std::uint64_t seed,
                                             double lambda_rbf_l2 = 1e-3) {
  if (max_n < min_n || step == 0) throw std::invalid_argument("neuron_sweep: bad neuron range");
  if (features.rows() < folds) throw std::invalid_argument("neuron_sweep: fewer samples than folds");

  std::vector<ElmKernel> unique;
  for (ElmKernel k : kernels) {
    if (std::find(unique.begin(), unique.end(), k) == unique.end()) {
      unique.push_back(k);
    } else {
      std::cerr << "neuron_sweep: duplicate kernel '" << to_string(k) << "' ignored\n";
    }
  }

  auto fold_sets = kfold_split(features.rows(), folds, seed);
  std::vector<SweepRecord> records;
  std::size_t cell = 0;
  for (ElmKernel kernel : unique) {
    for (std::size_t n_hidden = min_n; n_hidden <= max_n; n_hidden += step, ++cell) {
      for (std::size_t f = 0; f < folds; ++f) {
        std::vector<bool> in_val(features.rows(), false);
        for (std::size_t i : fold_sets[f]) in_val[i] = true;

        std::vector<std::size_t> train_idx, val_idx;
        for (std::size_t i = 0; i < features.rows(); ++i)
          (in_val[i] ? val_idx : train_idx).push_back(i);

        auto gather = [&](const Matrix& src, const std::vector<std::size_t>& idx) {
          Matrix out(idx.size(), src.cols());
          for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < src.cols(); ++c) out(r, c) = src(idx[r], c);
          return out;
        };

        const double lambda = kernel == ElmKernel::kRbfL2 ? lambda_rbf_l2 : 0.0;
        ElmModel model = elm_train(gather(features, train_idx), gather(targets, train_idx), kernel,
                                   n_hidden, lambda, splitmix64_at(seed, cell));
        Matrix pred = elm_predict(model, gather(features, val_idx));
        Matrix truth = gather(targets, val_idx);
        std::vector<double> y(truth.data(), truth.data() + truth.size());
        std::vector<double> p(pred.data(), pred.data() + pred.size());
        records.push_back({kernel, n_hidden, f, mse(y, p), mae(y, p)});
      }
    }
  }
  return records;
}

/// SCConv features → ELM prediction, one PoseFrame per image. The ELM must
/// have been trained on this backbone's feature space.
inline std::vector<PoseFrame> refine_poses(const BackboneModel& backbone, const ElmModel& elm,
                                           const std::vector<Image>& images) {
  if (elm.input_dim != backbone.feature_dim())
    throw std::invalid_argument("refine_poses: feature dimension mismatch");
  if (elm.backbone_hash != 0 && elm.backbone_hash != backbone.param_hash())
    throw std::invalid_argument("refine_poses: ELM was trained on a different backbone");

  Matrix pred = elm_predict(elm, extract_features(backbone, images));
  std::vector<PoseFrame> out(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    out[i].frame_id = static_cast<std::int64_t>(i);
    for (int d = 0; d < kPoseDim; ++d)
      out[i].coords[static_cast<std::size_t>(d)] = pred(i, static_cast<std::size_t>(d));
  }
  return out;
}

}  // namespace armcast
