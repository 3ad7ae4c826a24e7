#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "armcast/elm.hpp"
#include "armcast/rng.hpp"

using namespace armcast;

namespace {

Matrix random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  return rng.normal_matrix(n, d, 0.0, 1.0);
}

// Targets = exact affine map of features: T = X·A + c.
Matrix affine_targets(const Matrix& x, std::uint64_t seed) {
  Rng rng(seed);
  Matrix a = rng.normal_matrix(x.cols(), 16, 0.0, 1.0);
  Matrix c = rng.normal_matrix(1, 16, 0.0, 1.0);
  Matrix t = matmul(x, a);
  t.map().rowwise() += c.map().row(0);
  return t;
}

double training_mse(const ElmModel& m, const Matrix& x, const Matrix& t) {
  Matrix p = elm_predict(m, x);
  std::vector<double> yv(t.data(), t.data() + t.size());
  std::vector<double> pv(p.data(), p.data() + p.size());
  return mse(yv, pv);
}

}  // namespace

TEST_CASE("kernel_activation basics", "[elm]") {
  SECTION("linear with W=I, b=0 is the identity") {
    ElmModel m;
    m.kernel = ElmKernel::kLinear;
    m.input_dim = 3;
    m.n_hidden = 3;
    m.weights = identity(3);
    m.bias = Matrix(1, 3);
    Matrix x = random_features(5, 3, 11);
    Matrix h = kernel_activation(m, x);
    REQUIRE(h.same_shape(x));
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(h[i] == x[i]);
  }

  SECTION("tanh with W=0, b=0 is all zeros") {
    ElmModel m;
    m.kernel = ElmKernel::kTanh;
    m.input_dim = 4;
    m.n_hidden = 6;
    m.weights = Matrix(4, 6);
    m.bias = Matrix(1, 6);
    Matrix h = kernel_activation(m, random_features(3, 4, 12));
    for (std::size_t i = 0; i < h.size(); ++i) REQUIRE(h[i] == 0.0);
  }

  SECTION("rbf at zero distance gives exactly 1") {
    ElmModel m;
    m.kernel = ElmKernel::kRbf;
    m.input_dim = 4;
    m.n_hidden = 2;
    Matrix x = random_features(1, 4, 13);
    m.centers = Matrix(2, 4);
    for (std::size_t c = 0; c < 4; ++c) m.centers(0, c) = x(0, c);
    m.widths = Matrix(1, 2, 3.7);
    Matrix h = kernel_activation(m, x);
    REQUIRE(h(0, 0) == 1.0);
    REQUIRE(h(0, 1) < 1.0);
  }

  SECTION("dimension mismatch throws") {
    ElmModel m;
    m.kernel = ElmKernel::kLinear;
    m.input_dim = 3;
    m.n_hidden = 3;
    m.weights = identity(3);
    m.bias = Matrix(1, 3);
    REQUIRE_THROWS_AS(kernel_activation(m, Matrix(2, 4)), std::invalid_argument);
  }
}

TEST_CASE("affine recovery with linear kernel", "[elm]") {
  const std::size_t n = 80, d = 12;
  Matrix x = random_features(n, d, 21);
  Matrix t = affine_targets(x, 22);

  ElmModel m = elm_train(x, t, ElmKernel::kLinear, d + 1, 0.0, 7);
  REQUIRE(training_mse(m, x, t) < 1e-12);

  // Prediction reproduces targets within 1e-6 entrywise.
  Matrix p = elm_predict(m, x);
  for (std::size_t i = 0; i < t.size(); ++i)
    REQUIRE(std::abs(p[i] - t[i]) < 1e-6);

  // Single row in → 1×16 out.
  Matrix one = x.row(0);
  Matrix p1 = elm_predict(m, one);
  REQUIRE(p1.rows() == 1);
  REQUIRE(p1.cols() == 16);
}

TEST_CASE("tanh interpolation at n_hidden == N == 50", "[elm]") {
  const std::size_t n = 50, d = 8;
  Matrix x = random_features(n, d, 31);
  Rng rng(32);
  Matrix t = rng.normal_matrix(n, 16, 0.0, 1.0);

  ElmModel m = elm_train(x, t, ElmKernel::kTanh, 50, 0.0, 33);
  REQUIRE(training_mse(m, x, t) < 1e-4);
}

TEST_CASE("ridge shrinkage and ridge limit", "[elm]") {
  const std::size_t n = 60, d = 10;
  Matrix x = random_features(n, d, 41);
  Matrix t = affine_targets(x, 42);

  SECTION("‖β‖ monotone decreasing in λ") {
    const double lambdas[] = {1e-6, 1e-3, 1.0, 1e3};
    double prev = -1.0;
    for (double lam : lambdas) {
      ElmModel m = elm_train(x, t, ElmKernel::kRbfL2, 40, lam, 43);
      double norm = m.beta.frobenius_norm();
      if (prev >= 0.0) REQUIRE(norm < prev);
      prev = norm;
    }
  }

  SECTION("λ → 0⁺ converges to the λ=0 rbf solution") {
    ElmModel base = elm_train(x, t, ElmKernel::kRbf, 40, 0.0, 43);
    const double lambdas[] = {1e-2, 1e-6, 1e-10};
    double prev_dist = std::numeric_limits<double>::infinity();
    for (double lam : lambdas) {
      ElmModel m = elm_train(x, t, ElmKernel::kRbfL2, 40, lam, 43);
      double dist = (m.beta - base.beta).frobenius_norm();
      REQUIRE(dist < prev_dist);
      prev_dist = dist;
    }
    // Both solves are SVD-based; the achievable agreement floor scales with
    // the conditioning of H, so the limit is asserted to 1e-5 relative.
    REQUIRE(prev_dist < 1e-5 * base.beta.frobenius_norm());
  }
}

TEST_CASE("seed determinism of elm_train", "[elm]") {
  Matrix x = random_features(40, 6, 51);
  Matrix t = affine_targets(x, 52);
  for (ElmKernel k : {ElmKernel::kLinear, ElmKernel::kTanh, ElmKernel::kRbf, ElmKernel::kRbfL2}) {
    const double lam = k == ElmKernel::kRbfL2 ? 1e-3 : 0.0;
    ElmModel a = elm_train(x, t, k, 30, lam, 99);
    ElmModel b = elm_train(x, t, k, 30, lam, 99);
    REQUIRE(a.beta.size() == b.beta.size());
    for (std::size_t i = 0; i < a.beta.size(); ++i) REQUIRE(a.beta[i] == b.beta[i]);
    Matrix pa = elm_predict(a, x), pb = elm_predict(b, x);
    for (std::size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i] == pb[i]);
  }
}

TEST_CASE("rbf center top-up when n_hidden > N", "[elm]") {
  Matrix x = random_features(10, 4, 61);
  Matrix t = affine_targets(x, 62);
  ElmModel m = elm_train(x, t, ElmKernel::kRbf, 25, 0.0, 63);
  REQUIRE(m.centers.rows() == 25);
  // First N centers are permuted feature rows; top-ups stay in per-dim range.
  for (std::size_t j = 10; j < 25; ++j)
    for (std::size_t c = 0; c < 4; ++c) {
      double lo = x(0, c), hi = x(0, c);
      for (std::size_t r = 1; r < 10; ++r) {
        lo = std::min(lo, x(r, c));
        hi = std::max(hi, x(r, c));
      }
      REQUIRE(m.centers(j, c) >= lo);
      REQUIRE(m.centers(j, c) <= hi);
    }
  for (std::size_t j = 0; j < 25; ++j) REQUIRE(m.widths(0, j) > 0.0);
}

TEST_CASE("elm_train precondition errors", "[elm]") {
  Matrix x = random_features(10, 4, 71);
  Matrix t = affine_targets(x, 72);
  REQUIRE_THROWS_AS(elm_train(x.row(0), t.row(0), ElmKernel::kLinear, 5, 0.0, 1),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(elm_train(x, t, ElmKernel::kLinear, 0, 0.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(elm_train(Matrix(10, 0), t, ElmKernel::kLinear, 5, 0.0, 1),
                    std::invalid_argument);
  Matrix bad_t = affine_targets(random_features(9, 4, 73), 74);
  REQUIRE_THROWS_AS(elm_train(x, bad_t, ElmKernel::kLinear, 5, 0.0, 1), std::invalid_argument);
}

TEST_CASE("neuron_sweep shape and dedup", "[elm]") {
  Matrix x = random_features(40, 6, 81);
  Matrix t = affine_targets(x, 82);

  SECTION("19 counts per kernel over 100..1000 step 50") {
    std::size_t counts = 0;
    for (std::size_t n = 100; n <= 1000; n += 50) ++counts;
    REQUIRE(counts == 19);
  }

  SECTION("rows = kernels × counts × folds; duplicates dropped") {
    auto recs = neuron_sweep(x, t, {ElmKernel::kLinear, ElmKernel::kTanh, ElmKernel::kLinear}, 10,
                             30, 10, 5, 7);
    REQUIRE(recs.size() == 2 * 3 * 5);  // 2 unique kernels, 3 counts, 5 folds
    std::set<std::size_t> hiddens;
    for (const auto& r : recs) {
      hiddens.insert(r.n_hidden);
      REQUIRE(r.fold < 5);
      REQUIRE(std::isfinite(r.mse));
      REQUIRE(std::isfinite(r.mae));
      REQUIRE(r.mse >= 0.0);
      REQUIRE(r.mae >= 0.0);
    }
    REQUIRE(hiddens == std::set<std::size_t>{10, 20, 30});
  }

  SECTION("fewer samples than folds throws") {
    Matrix xs = random_features(3, 6, 83);
    Matrix ts = affine_targets(xs, 84);
    REQUIRE_THROWS_AS(neuron_sweep(xs, ts, {ElmKernel::kLinear}, 10, 10, 10, 5, 1),
                      std::invalid_argument);
  }
}

TEST_CASE("refine_poses composes backbone features with elm_predict", "[elm]") {
  BackboneArch arch;
  arch.variant = BackboneVariant::kScConv;
  arch.input_size = 16;
  BackboneModel backbone = BackboneModel::init(arch, 5);

  // Small synthetic image batch.
  std::vector<Image> images;
  Rng rng(6);
  for (int i = 0; i < 6; ++i) {
    Image img(16, 16);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.index(256));
    images.push_back(img);
  }

  Matrix feats = extract_features(backbone, images);
  Matrix targets = affine_targets(feats, 91);
  ElmModel elm = elm_train(feats, targets, ElmKernel::kRbfL2, 12, 1e-3, 92);
  elm.backbone_hash = backbone.param_hash();

  auto frames = refine_poses(backbone, elm, images);
  REQUIRE(frames.size() == images.size());
  Matrix direct = elm_predict(elm, feats);
  for (std::size_t i = 0; i < frames.size(); ++i)
    for (std::size_t d = 0; d < 16; ++d) REQUIRE(frames[i].coords[d] == direct(i, d));

  // Hash mismatch rejected.
  ElmModel wrong = elm;
  wrong.backbone_hash = elm.backbone_hash + 1;
  REQUIRE_THROWS_AS(refine_poses(backbone, wrong, images), std::invalid_argument);

  // Feature-dimension mismatch rejected.
  ElmModel small = elm_train(random_features(6, 3, 93), affine_targets(random_features(6, 3, 93), 94),
                             ElmKernel::kLinear, 5, 0.0, 95);
  REQUIRE_THROWS_AS(refine_poses(backbone, small, images), std::invalid_argument);
}

TEST_CASE("kernel names round-trip", "[elm]") {
  for (ElmKernel k : {ElmKernel::kLinear, ElmKernel::kTanh, ElmKernel::kRbf, ElmKernel::kRbfL2})
    REQUIRE(elm_kernel_from_string(to_string(k)) == k);
  REQUIRE_THROWS_AS(elm_kernel_from_string("poly"), std::invalid_argument);
}
