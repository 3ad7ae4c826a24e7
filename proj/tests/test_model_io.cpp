#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "armcast/model_io.hpp"
#include "armcast/rng.hpp"

using namespace armcast;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("armcast_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("armf1 container round-trips raw blocks", "[model_io]") {
  TempDir tmp;
  Rng rng(1);
  Matrix a = rng.normal_matrix(3, 5, 0.0, 1.0);
  Matrix b = rng.normal_matrix(1, 4, 0.0, 1.0);
  write_armf1(tmp.file("raw.armf1"), {{"type", "raw"}, {"note", 7}}, {{"a", &a}, {"b", &b}});

  Armf1File f = read_armf1(tmp.file("raw.armf1"));
  REQUIRE(f.header.at("type") == "raw");
  REQUIRE(f.header.at("note") == 7);
  REQUIRE(f.blocks.size() == 2);
  REQUIRE(f.blocks[0].first == "a");  // header-declared order preserved
  REQUIRE(f.blocks[1].first == "b");
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(f.block("a")[i] == a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) REQUIRE(f.block("b")[i] == b[i]);
  REQUIRE_THROWS_AS(f.block("missing"), std::runtime_error);
}

TEST_CASE("armf1 file layout is magic + LE length + JSON + doubles", "[model_io]") {
  TempDir tmp;
  Matrix a(1, 1, {3.5});
  write_armf1(tmp.file("layout.armf1"), {{"type", "raw"}}, {{"a", &a}});

  std::ifstream in(tmp.file("layout.armf1"), std::ios::binary);
  char magic[5];
  in.read(magic, 5);
  REQUIRE(std::string(magic, 5) == "ARMF1");
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  std::string head(len, '\0');
  in.read(head.data(), len);
  REQUIRE(nlohmann::json::parse(head).at("type") == "raw");
  double v = 0.0;
  in.read(reinterpret_cast<char*>(&v), 8);
  REQUIRE(v == 3.5);
  REQUIRE(in.peek() == std::ifstream::traits_type::eof());
}

TEST_CASE("armf1 rejects corrupt files", "[model_io]") {
  TempDir tmp;
  Matrix a(2, 2, 1.0);
  const std::string path = tmp.file("model.armf1");
  write_armf1(path, {{"type", "raw"}}, {{"a", &a}});

  SECTION("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("NOPE!", 5);
    f.close();
    REQUIRE_THROWS_AS(read_armf1(path), std::runtime_error);
  }

  SECTION("truncated block") {
    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 8);
    REQUIRE_THROWS_AS(read_armf1(path), std::runtime_error);
  }

  SECTION("trailing bytes") {
    std::ofstream f(path, std::ios::app | std::ios::binary);
    f.write("x", 1);
    f.close();
    REQUIRE_THROWS_AS(read_armf1(path), std::runtime_error);
  }

  SECTION("missing file") { REQUIRE_THROWS_AS(read_armf1(tmp.file("nope.armf1")), std::runtime_error); }
}

TEST_CASE("backbone round-trip is bit-exact", "[model_io]") {
  TempDir tmp;
  BackboneArch arch;
  arch.input_size = 16;
  for (BackboneVariant v : {BackboneVariant::kScConv, BackboneVariant::kPlain}) {
    arch.variant = v;
    BackboneModel m = BackboneModel::init(arch, 9);
    // Perturb a couple of tensors so we are not just round-tripping init().
    Rng rng(10);
    m.head_w = rng.normal_matrix(m.head_w.rows(), m.head_w.cols(), 0.0, 1.0);
    m.stem_w = rng.normal_matrix(m.stem_w.rows(), m.stem_w.cols(), 0.0, 1.0);

    const std::string path = tmp.file("backbone_" + to_string(v) + ".armf1");
    save_backbone(path, m);
    BackboneModel r = load_backbone(path);
    REQUIRE(r.arch.variant == v);
    REQUIRE(r.arch.input_size == arch.input_size);
    REQUIRE(r.param_hash() == m.param_hash());

    Image img(16, 16);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      img.pixels[i] = static_cast<std::uint8_t>(i % 251);
    Matrix pa = predict_keypoints(m, {img});
    Matrix pb = predict_keypoints(r, {img});
    for (std::size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i] == pb[i]);
  }
}

TEST_CASE("elm round-trip preserves predictions and metadata", "[model_io]") {
  TempDir tmp;
  Rng rng(20);
  Matrix x = rng.normal_matrix(30, 8, 0.0, 1.0);
  Matrix t = rng.normal_matrix(30, 16, 0.0, 1.0);

  for (ElmKernel k : {ElmKernel::kLinear, ElmKernel::kTanh, ElmKernel::kRbf, ElmKernel::kRbfL2}) {
    const double lam = k == ElmKernel::kRbfL2 ? 1e-3 : 0.0;
    ElmModel m = elm_train(x, t, k, 12, lam, 21);
    m.backbone_hash = 0xDEADBEEFCAFEF00DULL;
    const std::string path = tmp.file("elm_" + to_string(k) + ".armf1");
    save_elm(path, m);
    ElmModel r = load_elm(path);
    REQUIRE(r.kernel == k);
    REQUIRE(r.n_hidden == 12);
    REQUIRE(r.lambda == lam);
    REQUIRE(r.seed == 21);
    REQUIRE(r.backbone_hash == m.backbone_hash);
    Matrix pa = elm_predict(m, x), pb = elm_predict(r, x);
    for (std::size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i] == pb[i]);
  }
}

TEST_CASE("forecast round-trip preserves predictions and stats", "[model_io]") {
  TempDir tmp;
  Rng rng(30);
  Matrix series(40, kPoseDim);
  for (std::size_t r = 0; r < series.rows(); ++r)
    for (std::size_t c = 0; c < kPoseDim; ++c)
      series(r, c) = 48.0 + 5.0 * std::sin(0.3 * static_cast<double>(r + c));
  ForecastHyper hyper;
  hyper.epochs = 2;
  hyper.hidden = 6;
  hyper.batch = 8;
  hyper.lr = 1e-3;
  hyper.seed = 31;

  for (RnnCell cell : {RnnCell::kLstm, RnnCell::kGru}) {
    ForecastResult res = train_forecast(series, cell, 5, 3, hyper);
    const std::string path = tmp.file("forecast_" + to_string(cell) + ".armf1");
    save_forecast(path, res.model);
    ForecastModel r = load_forecast(path);
    REQUIRE(r.cell == cell);
    REQUIRE(r.past_n == 5);
    REQUIRE(r.future_f == 3);
    REQUIRE(r.hidden == 6);
    Matrix past = series.col_block(0, kPoseDim);
    Matrix window(5, kPoseDim);
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t c = 0; c < kPoseDim; ++c) window(t, c) = series(t, c);
    Matrix pa = encdec_forward(res.model, window);
    Matrix pb = encdec_forward(r, window);
    for (std::size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i] == pb[i]);
  }
}

TEST_CASE("typed loaders reject wrong container type", "[model_io]") {
  TempDir tmp;
  BackboneArch arch;
  arch.input_size = 16;
  BackboneModel m = BackboneModel::init(arch, 5);
  save_backbone(tmp.file("bb.armf1"), m);
  REQUIRE_THROWS_AS(load_elm(tmp.file("bb.armf1")), std::runtime_error);
  REQUIRE_THROWS_AS(load_forecast(tmp.file("bb.armf1")), std::runtime_error);
}
