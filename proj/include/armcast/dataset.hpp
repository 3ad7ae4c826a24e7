#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "armcast/pose.hpp"
#include "armcast/render.hpp"
#include "armcast/rng.hpp"
#include "armcast/trajectory.hpp"

namespace armcast {

namespace fs = std::filesystem;

/// poses_*.csv: header `frame_id,x0,y0,...,x7,y7`, LF endings, 6 decimals.
inline void write_pose_csv(const std::vector<PoseFrame>& frames, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pose_csv: cannot open " + path);
  out << "frame_id";
  for (int k = 0; k < kNumKeypoints; ++k) out << ",x" << k << ",y" << k;
  out << "\n";
  char buf[32];
  for (const PoseFrame& f : frames) {
    out << f.frame_id;
    for (double c : f.coords) {
      std::snprintf(buf, sizeof(buf), ",%.6f", c);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_pose_csv: write failed for " + path);
}

inline std::vector<PoseFrame> read_pose_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_pose_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_pose_csv: empty file " + path);
  std::vector<PoseFrame> frames;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    PoseFrame f;
    const char* p = line.c_str();
    char* end = nullptr;
    f.frame_id = std::strtoll(p, &end, 10);
    p = end;
    for (int i = 0; i < kPoseDim; ++i) {
      if (*p != ',') throw std::runtime_error("read_pose_csv: malformed row in " + path);
      ++p;
      f.coords[static_cast<std::size_t>(i)] = std::strtod(p, &end);
      p = end;
    }
    frames.push_back(f);
  }
  return frames;
}

inline std::string frame_filename(std::int64_t frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06lld.pgm", static_cast<long long>(frame_id));
  return buf;
}

struct DatasetManifest {
  std::uint64_t seed = 0;
  double fps = 20.0;
  double duration_s = 0.0;
  std::int64_t full_frames = 0;
  std::int64_t annotated_frames = 0;
  double noise_sigma = 1.0;
  int render_size = 96;
  bool render_full = false;

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"fps", fps},
            {"duration_s", duration_s},
            {"full_frames", full_frames},
            {"annotated_frames", annotated_frames},
            {"noise_sigma", noise_sigma},
            {"render_size", render_size},
            {"render_full", render_full},
            {"keypoint_ordering", "base to tool: x0,y0,...,x7,y7"},
            {"fps_note", "capture rate fixed at 20 fps"}};
  }

  static DatasetManifest from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.fps = j.at("fps").get<double>();
    m.duration_s = j.at("duration_s").get<double>();
    m.full_frames = j.at("full_frames").get<std::int64_t>();
    m.annotated_frames = j.at("annotated_frames").get<std::int64_t>();
    m.noise_sigma = j.at("noise_sigma").get<double>();
    m.render_size = j.at("render_size").get<int>();
    m.render_full = j.value("render_full", false);
    return m;
  }
};

inline DatasetManifest read_manifest(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("read_manifest: no manifest.json in " + dir);
  nlohmann::json j;
  in >> j;
  return DatasetManifest::from_json(j);
}

/// Full synthetic dataset: sequential ground-truth pose CSV, a subsampled
/// annotated split (noisy coordinates + rendered frames), and a manifest.
/// Refuses to overwrite an existing dataset unless `force` is set.
inline DatasetManifest synth_dataset(const SynthConfig& config, const ArmModel& arm,
                                     const Camera& cam, const std::string& out_dir,
                                     bool force = false) {
  config.validate();
  const fs::path dir(out_dir);
  if (fs::exists(dir / "manifest.json") && !force)
    throw std::runtime_error("synth_dataset: " + out_dir + " already exists (use force)");
  fs::create_directories(dir / "frames");

  const Matrix angles = gen_trajectory(config, arm);
  const auto n_frames = angles.rows();

  std::vector<PoseFrame> full;
  full.reserve(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    std::array<double, kNumLinks> a{};
    for (int j = 0; j < kNumLinks; ++j) a[static_cast<std::size_t>(j)] = angles(i, static_cast<std::size_t>(j));
    full.push_back(project_pose(forward_kinematics(arm, a), cam, static_cast<std::int64_t>(i)));
  }
  write_pose_csv(full, (dir / "poses_full.csv").string());

  // Annotated split: arithmetic progression of frame ids, step = fps / subsample rate.
  const auto step = static_cast<std::size_t>(std::llround(config.fps / config.annotation_subsample_hz));
  Rng noise_rng(splitmix64_at(config.seed, 0xA110));
  std::vector<PoseFrame> annotated;
  for (std::size_t i = 0; i < n_frames; i += std::max<std::size_t>(step, 1)) {
    PoseFrame f = full[i];
    for (double& c : f.coords) c += noise_rng.normal(0.0, config.noise_sigma);
    annotated.push_back(f);
  }
  write_pose_csv(annotated, (dir / "poses_annotated.csv").string());

  const std::uint64_t render_seed = splitmix64_at(config.seed, 0xBE6);
  if (config.render_full) {
    for (const PoseFrame& f : full)
      write_pgm(render_frame(f, config.render_size, render_seed),
                (dir / "frames" / frame_filename(f.frame_id)).string());
  } else {
    for (const PoseFrame& f : annotated) {
      // Render from ground truth; noise lives only in the annotation CSV.
      write_pgm(render_frame(full[static_cast<std::size_t>(f.frame_id)], config.render_size, render_seed),
                (dir / "frames" / frame_filename(f.frame_id)).string());
    }
  }

  DatasetManifest manifest;
  manifest.seed = config.seed;
  manifest.fps = config.fps;
  manifest.duration_s = config.duration_s;
  manifest.full_frames = static_cast<std::int64_t>(full.size());
  manifest.annotated_frames = static_cast<std::int64_t>(annotated.size());
  manifest.noise_sigma = config.noise_sigma;
  manifest.render_size = config.render_size;
  manifest.render_full = config.render_full;
  std::ofstream mout(dir / "manifest.json", std::ios::binary);
  mout << manifest.to_json().dump(2) << "\n";
  if (!mout) throw std::runtime_error("synth_dataset: failed writing manifest");
  return manifest;
}

/// VIA-style keypoint JSON importer: per-image point regions, ordered by
/// region index, mapped into poses_annotated.csv rows. Images are ordered by
/// filename; the frame id is parsed from the trailing digits.
inline std::vector<PoseFrame> import_via_annotations(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("import_via_annotations: cannot open " + json_path);
  nlohmann::json j;
  in >> j;

  std::map<std::string, PoseFrame> by_name;
  for (const auto& [key, entry] : j.items()) {
    const std::string filename = entry.value("filename", key);
    const auto& regions = entry.at("regions");
    if (regions.size() != kNumKeypoints)
      throw std::runtime_error("import_via_annotations: " + filename + " has " +
                               std::to_string(regions.size()) + " regions, expected 8");
    PoseFrame f;
    int k = 0;
    for (const auto& region : regions) {
      const auto& shape = region.at("shape_attributes");
      if (shape.at("name").get<std::string>() != "point")
        throw std::runtime_error("import_via_annotations: non-point region in " + filename);
      f.coords[static_cast<std::size_t>(2 * k)] = shape.at("cx").get<double>();
      f.coords[static_cast<std::size_t>(2 * k + 1)] = shape.at("cy").get<double>();
      ++k;
    }
    // Trailing digit run in the stem is the frame id.
    const std::string stem = fs::path(filename).stem().string();
    std::size_t pos = stem.size();
    while (pos > 0 && std::isdigit(static_cast<unsigned char>(stem[pos - 1]))) --pos;
    f.frame_id = pos < stem.size() ? std::stoll(stem.substr(pos)) : 0;
    by_name[filename] = f;
  }

  std::vector<PoseFrame> frames;
  frames.reserve(by_name.size());
  for (const auto& [name, f] : by_name) frames.push_back(f);
  return frames;
}

}  // namespace armcast
