#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "armcast/backbone.hpp"
#include "armcast/elm.hpp"
#include "armcast/forecast.hpp"
#include "armcast/matrix.hpp"

namespace armcast {

static_assert(std::endian::native == std::endian::little,
              "ARMF1 stores raw little-endian doubles; big-endian hosts need byte swapping");

/// `ARMF1` model container: 5-byte magic, 4-byte little-endian header length,
/// JSON header (type descriptor plus block names/shapes in order), then raw
/// little-endian float64 parameter blocks in header-declared order.
inline void write_armf1(const std::string& path, nlohmann::json header,
                        const std::vector<std::pair<std::string, const Matrix*>>& blocks) {
  nlohmann::json block_list = nlohmann::json::array();
  for (const auto& [name, m] : blocks)
    block_list.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  header["blocks"] = block_list;

  const std::string head = header.dump();
  if (head.size() > 0xFFFFFFFFull) throw std::runtime_error("write_armf1: header too large");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_armf1: cannot open " + path);
  out.write("ARMF1", 5);
  const std::uint32_t len = static_cast<std::uint32_t>(head.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& [name, m] : blocks)
    out.write(reinterpret_cast<const char*>(m->data()),
              static_cast<std::streamsize>(m->size() * sizeof(double)));
  if (!out) throw std::runtime_error("write_armf1: write failed for " + path);
}

struct Armf1File {
  nlohmann::json header;
  std::vector<std::pair<std::string, Matrix>> blocks;

  const Matrix& block(const std::string& name) const {
    for (const auto& [n, m] : blocks)
      if (n == name) return m;
    throw std::runtime_error("ARMF1: missing block '" + name + "'");
  }
};

inline Armf1File read_armf1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_armf1: cannot open " + path);
  char magic[5];
  in.read(magic, 5);
  if (!in || std::string(magic, 5) != "ARMF1")
    throw std::runtime_error("read_armf1: bad magic in " + path);
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  if (!in) throw std::runtime_error("read_armf1: truncated header length in " + path);
  std::string head(len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("read_armf1: truncated header in " + path);

  Armf1File file;
  try {
    file.header = nlohmann::json::parse(head);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("read_armf1: invalid header JSON in " + path + ": " + e.what());
  }
  if (!file.header.contains("blocks") || !file.header["blocks"].is_array())
    throw std::runtime_error("read_armf1: header lacks block list in " + path);

  for (const auto& b : file.header["blocks"]) {
    const std::string name = b.at("name").get<std::string>();
    const auto rows = b.at("rows").get<std::size_t>();
    const auto cols = b.at("cols").get<std::size_t>();
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw std::runtime_error("read_armf1: truncated block '" + name + "' in " + path);
    file.blocks.emplace_back(name, std::move(m));
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    throw std::runtime_error("read_armf1: trailing bytes in " + path);
  return file;
}

// ---- Backbone -------------------------------------------------------------

inline void save_backbone(const std::string& path, const BackboneModel& m) {
  nlohmann::json header = {{"type", "backbone"},
                           {"variant", to_string(m.arch.variant)},
                           {"input_size", m.arch.input_size},
                           {"stem_channels", m.arch.stem_channels},
                           {"block1_channels", m.arch.block1_channels},
                           {"block2_channels", m.arch.block2_channels},
                           {"pool_rate", m.arch.pool_rate},
                           {"seed", m.seed}};
  write_armf1(path, header, m.params());
}

inline BackboneModel load_backbone(const std::string& path) {
  Armf1File file = read_armf1(path);
  if (file.header.value("type", "") != "backbone")
    throw std::runtime_error("load_backbone: " + path + " is not a backbone model");
  BackboneArch arch;
  arch.variant = backbone_variant_from_string(file.header.at("variant").get<std::string>());
  arch.input_size = file.header.at("input_size").get<std::size_t>();
  arch.stem_channels = file.header.at("stem_channels").get<std::size_t>();
  arch.block1_channels = file.header.at("block1_channels").get<std::size_t>();
  arch.block2_channels = file.header.at("block2_channels").get<std::size_t>();
  arch.pool_rate = file.header.at("pool_rate").get<std::size_t>();
  BackboneModel m = BackboneModel::init(arch, file.header.at("seed").get<std::uint64_t>());
  for (auto& [name, param] : m.params()) {
    const Matrix& stored = file.block(name);
    if (!stored.same_shape(*param))
      throw std::runtime_error("load_backbone: shape mismatch for block '" + name + "'");
    *param = stored;
  }
  return m;
}

// ---- ELM ------------------------------------------------------------------

inline void save_elm(const std::string& path, const ElmModel& m) {
  nlohmann::json header = {{"type", "elm"},
                           {"kernel", to_string(m.kernel)},
                           {"n_hidden", m.n_hidden},
                           {"input_dim", m.input_dim},
                           {"lambda", m.lambda},
                           {"seed", m.seed},
                           {"backbone_hash", m.backbone_hash}};
  std::vector<std::pair<std::string, const Matrix*>> blocks;
  if (m.is_rbf()) {
    blocks.emplace_back("centers", &m.centers);
    blocks.emplace_back("widths", &m.widths);
  } else {
    blocks.emplace_back("weights", &m.weights);
    blocks.emplace_back("bias", &m.bias);
  }
  blocks.emplace_back("beta", &m.beta);
  write_armf1(path, header, blocks);
}

inline ElmModel load_elm(const std::string& path) {
  Armf1File file = read_armf1(path);
  if (file.header.value("type", "") != "elm")
    throw std::runtime_error("load_elm: " + path + " is not an ELM model");
  ElmModel m;
  m.kernel = elm_kernel_from_string(file.header.at("kernel").get<std::string>());
  m.n_hidden = file.header.at("n_hidden").get<std::size_t>();
  m.input_dim = file.header.at("input_dim").get<std::size_t>();
  m.lambda = file.header.at("lambda").get<double>();
  m.seed = file.header.at("seed").get<std::uint64_t>();
  m.backbone_hash = file.header.at("backbone_hash").get<std::uint64_t>();
  if (m.is_rbf()) {
    m.centers = file.block("centers");
    m.widths = file.block("widths");
  } else {
    m.weights = file.block("weights");
    m.bias = file.block("bias");
  }
  m.beta = file.block("beta");
  if (m.beta.cols() != static_cast<std::size_t>(kPoseDim) || m.beta.rows() != m.n_hidden)
    throw std::runtime_error("load_elm: inconsistent beta shape in " + path);
  return m;
}

// ---- Forecast -------------------------------------------------------------

inline void save_forecast(const std::string& path, const ForecastModel& m) {
  nlohmann::json header = {{"type", "forecast"}, {"cell", to_string(m.cell)},
                           {"hidden", m.hidden}, {"n", m.past_n},
                           {"f", m.future_f}};
  std::vector<std::pair<std::string, const Matrix*>> blocks;
  ForecastModel& mut = const_cast<ForecastModel&>(m);
  for (auto& [name, param] : mut.params()) blocks.emplace_back(name, param);
  blocks.emplace_back("stats.mean", &m.mean);
  blocks.emplace_back("stats.stddev", &m.stddev);
  write_armf1(path, header, blocks);
}

inline ForecastModel load_forecast(const std::string& path) {
  Armf1File file = read_armf1(path);
  if (file.header.value("type", "") != "forecast")
    throw std::runtime_error("load_forecast: " + path + " is not a forecast model");
  ForecastModel m = ForecastModel::init(rnn_cell_from_string(file.header.at("cell").get<std::string>()),
                                        file.header.at("n").get<std::size_t>(),
                                        file.header.at("f").get<std::size_t>(),
                                        file.header.at("hidden").get<std::size_t>(), 0);
  for (auto& [name, param] : m.params()) {
    const Matrix& stored = file.block(name);
    if (!stored.same_shape(*param))
      throw std::runtime_error("load_forecast: shape mismatch for block '" + name + "'");
    *param = stored;
  }
  m.mean = file.block("stats.mean");
  m.stddev = file.block("stats.stddev");
  for (std::size_t c = 0; c < m.stddev.size(); ++c)
    if (!(m.stddev[c] > 0.0))
      throw std::runtime_error("load_forecast: non-positive stddev in " + path);
  return m;
}

}  // namespace armcast
