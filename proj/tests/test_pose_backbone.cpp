#include <catch2/catch_amalgamated.hpp>

#include "armcast/backbone.hpp"
#include "armcast/grad_check.hpp"
#include "armcast/scconv.hpp"

using namespace armcast;

namespace {

// Quadratic readout so gradient errors cannot cancel.
double readout_loss(const Matrix& out, const Matrix& coeff) {
  double loss = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) loss += coeff[i] * out[i] * out[i];
  return loss;
}

Matrix readout_grad(const Matrix& out, const Matrix& coeff) {
  Matrix g(out.rows(), out.cols());
  for (std::size_t i = 0; i < out.size(); ++i) g[i] = 2.0 * coeff[i] * out[i];
  return g;
}

}  // namespace

TEST_CASE("conv3x3 matches a hand-computed sum") {
  // Single channel, 3x3 image, kernel of ones: center output = sum of image.
  Tensor x(1, 3, 3, 1);
  double total = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    x.data[i] = static_cast<double>(i + 1);
    total += x.data[i];
  }
  Matrix w(9, 1, {1, 1, 1, 1, 1, 1, 1, 1, 1});
  Matrix b(1, 1, {0.5});
  Tensor y = conv3x3_forward(x, w, b, 1);
  CHECK(y.at(0, 1, 1, 0) == Catch::Approx(total + 0.5));
  // Corner sees only the 2x2 in-bounds patch.
  CHECK(y.at(0, 0, 0, 0) == Catch::Approx(1 + 2 + 4 + 5 + 0.5));
}

TEST_CASE("avgpool and upsample shapes and values") {
  Tensor x(1, 4, 4, 2);
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = 1.0;
  Tensor p = avgpool_forward(x, 2);
  CHECK(p.h == 2);
  CHECK(p.w == 2);
  for (std::size_t i = 0; i < p.data.size(); ++i) CHECK(p.data[i] == Catch::Approx(1.0));

  Tensor u = upsample_forward(p, 2);
  CHECK(u.h == 4);
  for (std::size_t i = 0; i < u.data.size(); ++i) CHECK(u.data[i] == Catch::Approx(1.0));
}

TEST_CASE("global average pool of a constant map returns that constant") {
  Tensor x(2, 4, 4, 3);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t xx = 0; xx < 4; ++xx)
        for (std::size_t ch = 0; ch < 3; ++ch) x.at(b, y, xx, ch) = 2.0 + static_cast<double>(ch);
  Matrix g = global_avgpool_forward(x);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t ch = 0; ch < 3; ++ch) CHECK(g(b, ch) == Catch::Approx(2.0 + ch));
}

TEST_CASE("scconv zero parameters and zero input give zero output") {
  SCConvParams p;
  p.half_channels = 4;
  p.pool_rate = 4;
  for (Matrix* w : {&p.f1_w, &p.f2_w, &p.f3_w, &p.f4_w}) *w = Matrix(36, 4);
  for (Matrix* b : {&p.f1_b, &p.f2_b, &p.f3_b, &p.f4_b}) *b = Matrix(1, 4);
  Tensor x(1, 8, 8, 8);
  Tensor y = scconv_forward(x, p);
  for (std::size_t i = 0; i < y.data.size(); ++i) CHECK(y.data[i] == 0.0);
}

TEST_CASE("scconv preserves shape") {
  Rng rng(2);
  SCConvParams p = SCConvParams::init(8, 4, rng);
  Tensor x(2, 24, 24, 8);
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = rng.normal(0, 0.5);
  Tensor y = scconv_forward(x, p);
  CHECK(y.batch == 2);
  CHECK(y.h == 24);
  CHECK(y.w == 24);
  CHECK(y.c == 8);

  Tensor odd(1, 24, 24, 7);
  CHECK_THROWS_AS(scconv_forward(odd, p), std::invalid_argument);
  Tensor bad(1, 10, 10, 8);
  CHECK_THROWS_AS(scconv_forward(bad, p), std::invalid_argument);
}

TEST_CASE("scconv analytic gradients match finite differences") {
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    Rng rng(seed);
    SCConvParams p = SCConvParams::init(4, 4, rng);
    Tensor x(1, 8, 8, 4);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = rng.normal(0, 0.7);
    Matrix coeff = rng.uniform_matrix(x.h * x.w, 4, 0.5, 1.5);

    SCConvCache cache;
    Tensor out = scconv_forward(x, p, &cache);
    SCConvGrads g = SCConvGrads::zeros_like(p);
    Tensor dout = out;
    dout.data = readout_grad(out.data, coeff);
    scconv_backward(dout, p, cache, g);

    std::vector<std::pair<Matrix*, Matrix*>> pairs = {
        {&p.f1_w, &g.f1_w}, {&p.f1_b, &g.f1_b}, {&p.f2_w, &g.f2_w}, {&p.f2_b, &g.f2_b},
        {&p.f3_w, &g.f3_w}, {&p.f3_b, &g.f3_b}, {&p.f4_w, &g.f4_w}, {&p.f4_b, &g.f4_b}};
    for (auto [param, grad] : pairs) {
      Matrix saved = *param;
      auto f = [&](const Matrix& theta) {
        *param = theta;
        double loss = readout_loss(scconv_forward(x, p).data, coeff);
        return loss;
      };
      Matrix numeric = finite_diff_grad(f, saved, 1e-5);
      *param = saved;
      CHECK(grad_rel_error(*grad, numeric) < 1e-4);
    }
  }
}

TEST_CASE("backbone forward shapes and zero-head behavior") {
  BackboneArch arch;
  arch.input_size = 96;
  BackboneModel m = BackboneModel::init(arch, 3);
  m.head_b(0, 5) = 7.25;

  Rng rng(4);
  Tensor images(2, 96, 96, 1);
  for (std::size_t i = 0; i < images.data.size(); ++i) images.data[i] = rng.uniform();
  BackboneOutput out = backbone_forward(m, images);
  CHECK(out.features.rows() == 2);
  CHECK(out.features.cols() == 32);
  CHECK(out.keypoints.rows() == 2);
  CHECK(out.keypoints.cols() == 16);
  // Zero-initialized head weights: keypoints equal the head bias.
  CHECK(out.keypoints(0, 5) == Catch::Approx(7.25));
  CHECK(out.keypoints(1, 0) == Catch::Approx(0.0).margin(1e-15));

  Tensor wrong(1, 64, 64, 1);
  CHECK_THROWS_AS(backbone_forward(m, wrong), std::invalid_argument);
}

TEST_CASE("zero image with zero-init biases gives zero features") {
  BackboneArch arch;
  arch.input_size = 96;
  BackboneModel m = BackboneModel::init(arch, 5);
  Tensor zero(1, 96, 96, 1);
  BackboneOutput out = backbone_forward(m, zero);
  for (std::size_t d = 0; d < 32; ++d) CHECK(out.features(0, d) == Catch::Approx(0.0).margin(1e-15));
}

static void check_backbone_grads(BackboneVariant variant, std::uint64_t seed) {
  BackboneArch arch;
  arch.variant = variant;
  arch.input_size = 16;
  BackboneModel m = BackboneModel::init(arch, seed);
  Rng rng(seed + 100);
  // Random head so the loss sees every parameter.
  m.head_w = rng.uniform_matrix(32, 16, -0.3, 0.3);
  m.head_b = rng.uniform_matrix(1, 16, -0.1, 0.1);

  Tensor images(2, 16, 16, 1);
  for (std::size_t i = 0; i < images.data.size(); ++i) images.data[i] = rng.uniform();
  Matrix coeff = rng.uniform_matrix(2, 16, 0.5, 1.5);

  BackboneCache cache;
  BackboneOutput out = backbone_forward(m, images, &cache);
  BackboneGrads g = BackboneGrads::zeros_like(m);
  backbone_backward(m, cache, readout_grad(out.keypoints, coeff), g);

  auto params = m.params();
  auto grads = g.param_list(m);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix saved = *params[i].second;
    auto f = [&](const Matrix& theta) {
      *params[i].second = theta;
      return readout_loss(backbone_forward(m, images).keypoints, coeff);
    };
    Matrix numeric = finite_diff_grad(f, saved, 1e-5);
    *params[i].second = saved;
    INFO(params[i].first);
    CHECK(grad_rel_error(*grads[i], numeric) < 1e-4);
  }
}

TEST_CASE("full backbone gradient check, scconv variant") {
  for (std::uint64_t seed : {1u, 2u, 3u}) check_backbone_grads(BackboneVariant::kScConv, seed);
}

TEST_CASE("full backbone gradient check, plain variant") {
  for (std::uint64_t seed : {4u, 5u, 6u}) check_backbone_grads(BackboneVariant::kPlain, seed);
}

TEST_CASE("extract_features shape and determinism") {
  BackboneArch arch;
  arch.input_size = 32;
  BackboneModel m = BackboneModel::init(arch, 9);
  PoseFrame pose;
  for (int k = 0; k < kNumKeypoints; ++k) {
    pose.coords[static_cast<std::size_t>(2 * k)] = 6.0 + 3.0 * k;
    pose.coords[static_cast<std::size_t>(2 * k + 1)] = 16.0;
  }
  std::vector<Image> images = {render_frame(pose, 32, 1), render_frame(pose, 32, 1),
                               render_frame(pose, 32, 2)};
  Matrix feats = extract_features(m, images);
  CHECK(feats.rows() == 3);
  CHECK(feats.cols() == 32);
  for (std::size_t d = 0; d < 32; ++d) CHECK(feats(0, d) == feats(1, d));
}

TEST_CASE("training reduces loss and is seed-deterministic") {
  // Small synthetic regression problem at 32x32.
  Rng rng(77);
  std::vector<Image> images;
  Matrix targets(20, kPoseDim);
  for (int i = 0; i < 20; ++i) {
    PoseFrame pose;
    for (int k = 0; k < kNumKeypoints; ++k) {
      pose.coords[static_cast<std::size_t>(2 * k)] = rng.uniform(6, 26);
      pose.coords[static_cast<std::size_t>(2 * k + 1)] = rng.uniform(6, 26);
    }
    images.push_back(render_frame(pose, 32, 5));
    for (int d = 0; d < kPoseDim; ++d)
      targets(static_cast<std::size_t>(i), static_cast<std::size_t>(d)) =
          pose.coords[static_cast<std::size_t>(d)];
  }

  PoseTrainHyper hyper;
  hyper.epochs = 30;
  hyper.lr = 1e-3;
  hyper.batch = 8;
  hyper.folds = 5;
  hyper.seed = 42;
  hyper.input_size = 32;

  std::vector<std::size_t> all_idx(20);
  for (std::size_t i = 0; i < 20; ++i) all_idx[i] = i;

  // Loss at init (head bias = mean target) vs after training.
  BackboneModel trained = train_pose_single(images, targets, all_idx, hyper, 1);
  Matrix pred = predict_keypoints(trained, images);
  BackboneArch arch;
  arch.input_size = 32;
  BackboneModel fresh = BackboneModel::init(arch, 1);
  for (std::size_t d = 0; d < kPoseDim; ++d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 20; ++i) acc += targets(i, d);
    fresh.head_b(0, d) = acc / 20.0;
  }
  Matrix pred0 = predict_keypoints(fresh, images);

  auto flat_mse = [&](const Matrix& p) {
    std::vector<double> y, q;
    for (std::size_t i = 0; i < p.size(); ++i) {
      y.push_back(targets[i]);
      q.push_back(p[i]);
    }
    return mse(y, q);
  };
  CHECK(flat_mse(pred) < flat_mse(pred0));

  // Same seed twice: identical parameters.
  BackboneModel again = train_pose_single(images, targets, all_idx, hyper, 1);
  auto pa = trained.params();
  auto pb = again.params();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pa[i].second->size(); ++j)
      REQUIRE((*pa[i].second)[j] == (*pb[i].second)[j]);
}

TEST_CASE("cross-validation produces one record per fold and an exact partition") {
  Rng rng(88);
  std::vector<Image> images;
  Matrix targets(10, kPoseDim);
  for (int i = 0; i < 10; ++i) {
    PoseFrame pose;
    for (int k = 0; k < kNumKeypoints; ++k) {
      pose.coords[static_cast<std::size_t>(2 * k)] = rng.uniform(6, 26);
      pose.coords[static_cast<std::size_t>(2 * k + 1)] = rng.uniform(6, 26);
    }
    images.push_back(render_frame(pose, 32, 5));
    for (int d = 0; d < kPoseDim; ++d)
      targets(static_cast<std::size_t>(i), static_cast<std::size_t>(d)) =
          pose.coords[static_cast<std::size_t>(d)];
  }
  PoseTrainHyper hyper;
  hyper.epochs = 2;
  hyper.folds = 5;
  hyper.input_size = 32;
  PoseTrainResult result = train_pose(images, targets, hyper);
  CHECK(result.records.size() == 5);
  CHECK(result.fold_models.size() == 5);
  for (const auto& r : result.records) {
    CHECK(r.mse >= 0.0);
    CHECK(r.mae >= 0.0);
  }
}
