#pragma once

#include <string>
#include <utility>
#include <vector>

#include "armcast/adam.hpp"
#include "armcast/errors.hpp"
#include "armcast/layers.hpp"
#include "armcast/metrics.hpp"
#include "armcast/pose.hpp"
#include "armcast/render.hpp"
#include "armcast/rng.hpp"
#include "armcast/scconv.hpp"

namespace armcast {

enum class BackboneVariant { kScConv, kPlain };

inline std::string to_string(BackboneVariant v) {
  return v == BackboneVariant::kScConv ? "scconv" : "plain";
}

inline BackboneVariant backbone_variant_from_string(const std::string& s) {
  if (s == "scconv") return BackboneVariant::kScConv;
  if (s == "plain") return BackboneVariant::kPlain;
  throw std::invalid_argument("unknown backbone variant '" + s + "'");
}

struct BackboneArch {
  BackboneVariant variant = BackboneVariant::kScConv;
  std::size_t input_size = 96;
  std::size_t stem_channels = 8;
  std::size_t block1_channels = 16;
  std::size_t block2_channels = 32;  // also the feature dimension D
  std::size_t pool_rate = 4;

  void validate() const {
    const std::size_t s1 = input_size / 2;  // after stem stride 2
    if (input_size % 2 != 0 || s1 % (2 * pool_rate) != 0 || (s1 / 2) % pool_rate != 0)
      throw std::invalid_argument("BackboneArch: input size incompatible with pooling stages");
    if (block1_channels % 2 != 0 || block2_channels % 2 != 0)
      throw std::invalid_argument("BackboneArch: block channel counts must be even");
  }
};

/// Toy-scale convolutional keypoint regressor:
/// stem 3×3 stride-2 ReLU → 1×1 widen → SCConv → 2×2 avg-pool → 1×1 widen →
/// SCConv → 2×2 avg-pool → global average pool → linear head (16 outputs).
/// The plain variant swaps each SCConv block for one 3×3 conv + ReLU.
struct BackboneModel {
  BackboneArch arch;
  std::uint64_t seed = 0;

  Matrix stem_w, stem_b;      // 9×8, 1×8
  Matrix widen1_w, widen1_b;  // 8×16
  SCConvParams block1;
  Matrix plain1_w, plain1_b;  // plain variant only
  Matrix widen2_w, widen2_b;  // 16×32
  SCConvParams block2;
  Matrix plain2_w, plain2_b;
  Matrix head_w, head_b;  // 32×16, 1×16

  std::size_t feature_dim() const { return arch.block2_channels; }

  static BackboneModel init(const BackboneArch& arch, std::uint64_t seed) {
    arch.validate();
    BackboneModel m;
    m.arch = arch;
    m.seed = seed;
    Rng rng(seed);
    auto glorot = [&rng](std::size_t fan_in, std::size_t fan_out, std::size_t rows,
                         std::size_t cols) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      return rng.uniform_matrix(rows, cols, -bound, bound);
    };

    m.stem_w = glorot(9, arch.stem_channels, 9, arch.stem_channels);
    m.stem_b = Matrix(1, arch.stem_channels);
    m.widen1_w = glorot(arch.stem_channels, arch.block1_channels, arch.stem_channels,
                        arch.block1_channels);
    m.widen1_b = Matrix(1, arch.block1_channels);
    if (arch.variant == BackboneVariant::kScConv) {
      m.block1 = SCConvParams::init(arch.block1_channels, arch.pool_rate, rng);
      m.block2 = SCConvParams::init(arch.block2_channels, arch.pool_rate, rng);
    } else {
      m.plain1_w = glorot(9 * arch.block1_channels, arch.block1_channels, 9 * arch.block1_channels,
                          arch.block1_channels);
      m.plain1_b = Matrix(1, arch.block1_channels);
      m.plain2_w = glorot(9 * arch.block2_channels, arch.block2_channels, 9 * arch.block2_channels,
                          arch.block2_channels);
      m.plain2_b = Matrix(1, arch.block2_channels);
    }
    m.widen2_w = glorot(arch.block1_channels, arch.block2_channels, arch.block1_channels,
                        arch.block2_channels);
    m.widen2_b = Matrix(1, arch.block2_channels);
    // Head zero-initialized; its bias is set to the training-set mean target.
    m.head_w = Matrix(arch.block2_channels, kPoseDim);
    m.head_b = Matrix(1, kPoseDim);
    return m;
  }

  std::vector<std::pair<std::string, Matrix*>> params() {
    std::vector<std::pair<std::string, Matrix*>> p = {
        {"stem_w", &stem_w},     {"stem_b", &stem_b},     {"widen1_w", &widen1_w},
        {"widen1_b", &widen1_b}, {"widen2_w", &widen2_w}, {"widen2_b", &widen2_b},
        {"head_w", &head_w},     {"head_b", &head_b}};
    if (arch.variant == BackboneVariant::kScConv) {
      for (auto [name, block] : {std::pair{"block1", &block1}, std::pair{"block2", &block2}}) {
        p.emplace_back(std::string(name) + ".f1_w", &block->f1_w);
        p.emplace_back(std::string(name) + ".f1_b", &block->f1_b);
        p.emplace_back(std::string(name) + ".f2_w", &block->f2_w);
        p.emplace_back(std::string(name) + ".f2_b", &block->f2_b);
        p.emplace_back(std::string(name) + ".f3_w", &block->f3_w);
        p.emplace_back(std::string(name) + ".f3_b", &block->f3_b);
        p.emplace_back(std::string(name) + ".f4_w", &block->f4_w);
        p.emplace_back(std::string(name) + ".f4_b", &block->f4_b);
      }
    } else {
      p.emplace_back("plain1_w", &plain1_w);
      p.emplace_back("plain1_b", &plain1_b);
      p.emplace_back("plain2_w", &plain2_w);
      p.emplace_back("plain2_b", &plain2_b);
    }
    return p;
  }

  std::vector<std::pair<std::string, const Matrix*>> params() const {
    auto mut = const_cast<BackboneModel*>(this)->params();
    std::vector<std::pair<std::string, const Matrix*>> out;
    out.reserve(mut.size());
    for (auto& [name, m] : mut) out.emplace_back(name, m);
    return out;
  }

  /// FNV-1a over all parameter bytes; ties an ELM head to the feature space
  /// of the backbone that produced its training features.
  std::uint64_t param_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, m] : params()) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(m->data());
      for (std::size_t i = 0; i < m->size() * sizeof(double); ++i)
        h = (h ^ bytes[i]) * 0x100000001b3ULL;
    }
    return h;
  }
};

struct BackboneCache {
  Tensor input;
  Tensor stem_pre, stem_act;
  Conv3x3Cache stem_cache;
  Tensor widen1_in, widen1_out;
  SCConvCache block1_cache;
  Tensor plain1_pre;
  Conv3x3Cache plain1_cache;
  Tensor block1_out, pool1_out;
  Tensor widen2_out;
  SCConvCache block2_cache;
  Tensor plain2_pre;
  Conv3x3Cache plain2_cache;
  Tensor block2_out, pool2_out;
  Matrix features;  // batch × D
};

struct BackboneOutput {
  Matrix features;   // batch × D
  Matrix keypoints;  // batch × 16, pixel units
};

inline BackboneOutput backbone_forward(const BackboneModel& m, const Tensor& images,
                                       BackboneCache* cache = nullptr) {
  if (images.h != m.arch.input_size || images.w != m.arch.input_size || images.c != 1)
    throw std::invalid_argument("backbone_forward: image size mismatch");

  BackboneCache local;
  BackboneCache& c = cache ? *cache : local;
  const bool keep = cache != nullptr;

  Tensor t = conv3x3_forward(images, m.stem_w, m.stem_b, 2, keep ? &c.stem_cache : nullptr);
  if (keep) c.stem_pre = t;
  t = relu_forward(t);
  if (keep) c.widen1_in = t;
  t = conv1x1_forward(t, m.widen1_w, m.widen1_b);
  if (m.arch.variant == BackboneVariant::kScConv) {
    t = scconv_forward(t, m.block1, keep ? &c.block1_cache : nullptr);
  } else {
    Tensor pre = conv3x3_forward(t, m.plain1_w, m.plain1_b, 1, keep ? &c.plain1_cache : nullptr);
    if (keep) c.plain1_pre = pre;
    if (keep) c.widen1_out = t;
    t = relu_forward(pre);
  }
  if (keep) c.block1_out = t;
  t = avgpool_forward(t, 2);
  if (keep) c.pool1_out = t;
  t = conv1x1_forward(t, m.widen2_w, m.widen2_b);
  if (m.arch.variant == BackboneVariant::kScConv) {
    if (keep) c.widen2_out = t;
    t = scconv_forward(t, m.block2, keep ? &c.block2_cache : nullptr);
  } else {
    if (keep) c.widen2_out = t;
    Tensor pre = conv3x3_forward(t, m.plain2_w, m.plain2_b, 1, keep ? &c.plain2_cache : nullptr);
    if (keep) c.plain2_pre = pre;
    t = relu_forward(pre);
  }
  if (keep) c.block2_out = t;
  t = avgpool_forward(t, 2);
  if (keep) c.pool2_out = t;

  BackboneOutput out;
  out.features = global_avgpool_forward(t);
  out.keypoints = matmul(out.features, m.head_w);
  out.keypoints.map().rowwise() += m.head_b.map().row(0);
  if (keep) c.features = out.features;
  return out;
}

struct BackboneGrads {
  Matrix stem_w, stem_b, widen1_w, widen1_b, widen2_w, widen2_b, head_w, head_b;
  SCConvGrads block1, block2;
  Matrix plain1_w, plain1_b, plain2_w, plain2_b;

  static BackboneGrads zeros_like(const BackboneModel& m) {
    BackboneGrads g;
    auto zero = [](const Matrix& src) { return Matrix(src.rows(), src.cols()); };
    g.stem_w = zero(m.stem_w);
    g.stem_b = zero(m.stem_b);
    g.widen1_w = zero(m.widen1_w);
    g.widen1_b = zero(m.widen1_b);
    g.widen2_w = zero(m.widen2_w);
    g.widen2_b = zero(m.widen2_b);
    g.head_w = zero(m.head_w);
    g.head_b = zero(m.head_b);
    if (m.arch.variant == BackboneVariant::kScConv) {
      g.block1 = SCConvGrads::zeros_like(m.block1);
      g.block2 = SCConvGrads::zeros_like(m.block2);
    } else {
      g.plain1_w = zero(m.plain1_w);
      g.plain1_b = zero(m.plain1_b);
      g.plain2_w = zero(m.plain2_w);
      g.plain2_b = zero(m.plain2_b);
    }
    return g;
  }

  std::vector<Matrix*> param_list(const BackboneModel& m) {
    std::vector<Matrix*> p = {&stem_w,   &stem_b,   &widen1_w, &widen1_b,
                              &widen2_w, &widen2_b, &head_w,   &head_b};
    if (m.arch.variant == BackboneVariant::kScConv) {
      for (SCConvGrads* b : {&block1, &block2}) {
        p.push_back(&b->f1_w);
        p.push_back(&b->f1_b);
        p.push_back(&b->f2_w);
        p.push_back(&b->f2_b);
        p.push_back(&b->f3_w);
        p.push_back(&b->f3_b);
        p.push_back(&b->f4_w);
        p.push_back(&b->f4_b);
      }
    } else {
      p.push_back(&plain1_w);
      p.push_back(&plain1_b);
      p.push_back(&plain2_w);
      p.push_back(&plain2_b);
    }
    return p;
  }
};

/// Backprop from d(keypoints), accumulating into `g`.
inline void backbone_backward(const BackboneModel& m, const BackboneCache& c,
                              const Matrix& dkeypoints, BackboneGrads& g) {
  g.head_w.map().noalias() += c.features.map().transpose() * dkeypoints.map();
  g.head_b.map().row(0) += dkeypoints.map().colwise().sum();
  Matrix dfeatures(c.features.rows(), c.features.cols());
  dfeatures.map().noalias() = dkeypoints.map() * m.head_w.map().transpose();

  Tensor dt = global_avgpool_backward(dfeatures, c.block2_out.h / 2, c.block2_out.w / 2);
  dt = avgpool_backward(dt, 2);
  if (m.arch.variant == BackboneVariant::kScConv) {
    dt = scconv_backward(dt, m.block2, c.block2_cache, g.block2);
  } else {
    dt = relu_backward(dt, c.plain2_pre);
    dt = conv3x3_backward(dt, c.plain2_cache, m.plain2_w, g.plain2_w, g.plain2_b);
  }
  dt = conv1x1_backward(dt, c.pool1_out, m.widen2_w, g.widen2_w, g.widen2_b);
  dt = avgpool_backward(dt, 2);
  if (m.arch.variant == BackboneVariant::kScConv) {
    dt = scconv_backward(dt, m.block1, c.block1_cache, g.block1);
  } else {
    dt = relu_backward(dt, c.plain1_pre);
    dt = conv3x3_backward(dt, c.plain1_cache, m.plain1_w, g.plain1_w, g.plain1_b);
  }
  dt = conv1x1_backward(dt, c.widen1_in, m.widen1_w, g.widen1_w, g.widen1_b);
  dt = relu_backward(dt, c.stem_pre);
  conv3x3_backward(dt, c.stem_cache, m.stem_w, g.stem_w, g.stem_b);  // input grad unused
}

/// Images to a normalized batch tensor (pixel intensities scaled to [0, 1]).
inline Tensor images_to_tensor(const std::vector<Image>& images,
                               const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
  const auto s = static_cast<std::size_t>(images[indices[0]].width);
  Tensor t(indices.size(), s, s, 1);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Image& img = images[indices[b]];
    if (static_cast<std::size_t>(img.width) != s || static_cast<std::size_t>(img.height) != s)
      throw std::invalid_argument("images_to_tensor: inconsistent image sizes");
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      t.data[b * s * s + i] = static_cast<double>(img.pixels[i]) / 255.0;
  }
  return t;
}

/// Row i = penultimate pooled feature vector of image i.
inline Matrix extract_features(const BackboneModel& m, const std::vector<Image>& images,
                               std::size_t batch = 32) {
  Matrix out(images.size(), m.feature_dim());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < images.size(); start += batch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(start + batch, images.size()); ++i) idx.push_back(i);
    BackboneOutput o = backbone_forward(m, images_to_tensor(images, idx));
    for (std::size_t b = 0; b < idx.size(); ++b)
      for (std::size_t d = 0; d < m.feature_dim(); ++d) out(idx[b], d) = o.features(b, d);
  }
  return out;
}

inline Matrix predict_keypoints(const BackboneModel& m, const std::vector<Image>& images,
                                std::size_t batch = 32) {
  Matrix out(images.size(), kPoseDim);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < images.size(); start += batch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(start + batch, images.size()); ++i) idx.push_back(i);
    BackboneOutput o = backbone_forward(m, images_to_tensor(images, idx));
    for (std::size_t b = 0; b < idx.size(); ++b)
      for (int d = 0; d < kPoseDim; ++d)
        out(idx[b], static_cast<std::size_t>(d)) = o.keypoints(b, static_cast<std::size_t>(d));
  }
  return out;
}

struct PoseTrainHyper {
  std::size_t epochs = 500;
  double lr = 1e-4;
  std::size_t batch = 8;
  std::size_t folds = 5;
  std::uint64_t seed = 1;
  BackboneVariant variant = BackboneVariant::kScConv;
  std::size_t input_size = 96;
};

struct FoldRecord {
  std::size_t fold = 0;
  double mse = 0.0;
  double mae = 0.0;
};

struct PoseTrainResult {
  std::vector<BackboneModel> fold_models;
  std::vector<FoldRecord> records;
  double mean_mse = 0.0, std_mse = 0.0;
  double mean_mae = 0.0, std_mae = 0.0;
};

namespace detail {

inline void mse_loss_grad(const Matrix& pred, const Matrix& target, double& loss, Matrix& dpred) {
  const double inv = 1.0 / static_cast<double>(pred.size());
  loss = 0.0;
  dpred = Matrix(pred.rows(), pred.cols());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    loss += d * d;
    dpred[i] = 2.0 * inv * d;
  }
  loss *= inv;
}

}  // namespace detail

/// One fold's gradient-descent training loop: Adam on batched MSE with a
/// fixed shuffle stream, bit-deterministic for a given seed.
inline BackboneModel train_pose_single(const std::vector<Image>& images, const Matrix& targets,
                                       const std::vector<std::size_t>& train_idx,
                                       const PoseTrainHyper& hyper, std::uint64_t seed) {
  BackboneArch arch;
  arch.variant = hyper.variant;
  arch.input_size = hyper.input_size;
  BackboneModel model = BackboneModel::init(arch, seed);

  // Head bias = mean training keypoint vector for a sane loss scale.
  for (std::size_t d = 0; d < kPoseDim; ++d) {
    double acc = 0.0;
    for (std::size_t i : train_idx) acc += targets(i, d);
    model.head_b(0, d) = acc / static_cast<double>(train_idx.size());
  }

  auto param_ptrs = model.params();
  std::vector<AdamState> states;
  states.reserve(param_ptrs.size());
  for (auto& [name, p] : param_ptrs) states.push_back(AdamState::for_params(*p, hyper.lr));

  Rng shuffle_rng(splitmix64_at(seed, 0x5));
  std::vector<std::size_t> order = train_idx;

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      std::vector<std::size_t> batch_idx(
          order.begin() + static_cast<long>(start),
          order.begin() + static_cast<long>(std::min(start + hyper.batch, order.size())));
      Tensor input = images_to_tensor(images, batch_idx);
      BackboneCache cache;
      BackboneOutput out = backbone_forward(model, input, &cache);

      Matrix target(batch_idx.size(), kPoseDim);
      for (std::size_t b = 0; b < batch_idx.size(); ++b)
        for (std::size_t d = 0; d < kPoseDim; ++d) target(b, d) = targets(batch_idx[b], d);

      double loss = 0.0;
      Matrix dpred;
      detail::mse_loss_grad(out.keypoints, target, loss, dpred);
      if (!std::isfinite(loss))
        throw NumericalError("train_pose: non-finite loss at epoch " + std::to_string(epoch));

      BackboneGrads grads = BackboneGrads::zeros_like(model);
      backbone_backward(model, cache, dpred, grads);

      auto grad_ptrs = grads.param_list(model);
      for (std::size_t i = 0; i < param_ptrs.size(); ++i)
        adam_step(*param_ptrs[i].second, *grad_ptrs[i], states[i]);
    }
  }
  return model;
}

/// 5-fold cross-validated training; records per-fold validation MSE and MAE
/// in pixel units.
inline PoseTrainResult train_pose(const std::vector<Image>& images, const Matrix& targets,
                                  const PoseTrainHyper& hyper) {
  if (images.size() != targets.rows())
    throw std::invalid_argument("train_pose: image/target count mismatch");
  if (images.size() < hyper.folds) throw std::invalid_argument("train_pose: fewer samples than folds");

  auto folds = kfold_split(images.size(), hyper.folds, hyper.seed);
  PoseTrainResult result;

  for (std::size_t f = 0; f < hyper.folds; ++f) {
    std::vector<bool> in_val(images.size(), false);
    for (std::size_t i : folds[f]) in_val[i] = true;
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < images.size(); ++i)
      if (!in_val[i]) train_idx.push_back(i);

    BackboneModel model = train_pose_single(images, targets, train_idx, hyper,
                                            splitmix64_at(hyper.seed, f));

    std::vector<double> y, p;
    std::vector<std::size_t> val_idx(folds[f].begin(), folds[f].end());
    Matrix pred = predict_keypoints(model, images, 32);
    for (std::size_t i : val_idx)
      for (std::size_t d = 0; d < kPoseDim; ++d) {
        y.push_back(targets(i, d));
        p.push_back(pred(i, d));
      }
    result.records.push_back({f, mse(y, p), mae(y, p)});
    result.fold_models.push_back(std::move(model));
  }

  std::vector<double> mses, maes;
  for (const auto& r : result.records) {
    mses.push_back(r.mse);
    maes.push_back(r.mae);
  }
  result.mean_mse = mean_of(mses);
  result.std_mse = stddev_of(mses);
  result.mean_mae = mean_of(maes);
  result.std_mae = stddev_of(maes);
  return result;
}

}  // namespace armcast
