#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "armcast/dataset.hpp"
#include "armcast/elm.hpp"
#include "armcast/forecast.hpp"
#include "armcast/metrics.hpp"
#include "armcast/rng.hpp"

namespace armcast {

namespace fs = std::filesystem;

inline const std::vector<std::size_t> kGridPastDefaults = {10, 20, 30, 45, 60};
inline const std::vector<std::size_t> kGridFutureDefaults = {1, 5, 15, 30, 60, 90, 120};

/// Write a run-result JSON `{context, mse, mae, seed, wall_time_s}` with
/// sorted keys so reruns are byte-comparable apart from the wall time.
inline void write_result_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_result_json: cannot open " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw std::runtime_error("write_result_json: write failed for " + path);
}

inline nlohmann::json read_result_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_result_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

inline std::string grid_result_filename(RnnCell cell, std::size_t n, std::size_t f) {
  return "grid_" + to_string(cell) + "_n" + std::to_string(n) + "_f" + std::to_string(f) + ".json";
}

struct GridSearchOutcome {
  std::size_t executed = 0;
  std::size_t skipped = 0;   // result file already present
  std::size_t failed = 0;    // recorded as failed, run continued
};

/// Past/future grid search: one forecast model per (cell kind, past n, future f),
/// each run sub-seeded as splitmix64(seed, i·|future_list|+j) and written to
/// its own result file. Existing result files are skipped, making interrupted
/// runs resumable. Failures are recorded and the sweep continues.
inline GridSearchOutcome grid_search(const Matrix& series, const std::vector<RnnCell>& cells,
                                     const std::vector<std::size_t>& past_list,
                                     const std::vector<std::size_t>& future_list,
                                     const ForecastHyper& hyper, std::uint64_t seed,
                                     const std::string& results_dir, std::size_t workers = 1) {
  if (past_list.empty() || future_list.empty())
    throw std::invalid_argument("grid_search: empty grid axis");
  const std::size_t max_n = *std::max_element(past_list.begin(), past_list.end());
  const std::size_t max_f = *std::max_element(future_list.begin(), future_list.end());
  if (series.rows() < max_n + max_f + 1)
    throw std::invalid_argument("grid_search: series too short for the largest grid cell");
  fs::create_directories(results_dir);

  struct Job {
    RnnCell cell;
    std::size_t n, f;
    std::uint64_t sub_seed;
  };
  std::vector<Job> jobs;
  for (RnnCell cell : cells)
    for (std::size_t i = 0; i < past_list.size(); ++i)
      for (std::size_t j = 0; j < future_list.size(); ++j)
        jobs.push_back({cell, past_list[i], future_list[j],
                        splitmix64_at(seed, i * future_list.size() + j)});

  GridSearchOutcome outcome;
  std::mutex mu;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      const Job& job = jobs[k];
      const std::string path =
          (fs::path(results_dir) / grid_result_filename(job.cell, job.n, job.f)).string();
      if (fs::exists(path)) {
        std::lock_guard lock(mu);
        ++outcome.skipped;
        continue;
      }
      ForecastHyper h = hyper;
      h.seed = job.sub_seed;
      nlohmann::json doc;
      doc["context"] = {{"cell", to_string(job.cell)}, {"n", job.n}, {"f", job.f}};
      doc["seed"] = job.sub_seed;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        ForecastResult res = train_forecast(series, job.cell, job.n, job.f, h);
        doc["status"] = "ok";
        doc["mse"] = res.val_mse;
        doc["mae"] = res.val_mae;
        std::lock_guard lock(mu);
        ++outcome.executed;
      } catch (const std::exception& e) {
        doc["status"] = "failed";
        doc["error"] = e.what();
        std::lock_guard lock(mu);
        ++outcome.failed;
        std::cerr << "grid_search: cell " << to_string(job.cell) << " n=" << job.n
                  << " f=" << job.f << " failed: " << e.what() << "\n";
      }
      doc["wall_time_s"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_result_json(path, doc);
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return outcome;
}

/// Fig. 6's automatic annotation: run every rendered frame in `frames_dir`
/// through the backbone + ELM refiner and write the full pose series CSV.
/// The frame count must match the dataset manifest.
inline std::vector<PoseFrame> auto_annotate(const BackboneModel& backbone, const ElmModel& elm,
                                            const std::string& dataset_dir,
                                            const std::string& out_csv) {
  const DatasetManifest manifest = read_manifest(dataset_dir);
  const fs::path frames = fs::path(dataset_dir) / "frames";
  std::vector<std::pair<std::int64_t, fs::path>> frame_files;
  for (const auto& entry : fs::directory_iterator(frames)) {
    const std::string stem = entry.path().stem().string();
    if (entry.path().extension() != ".pgm" || stem.rfind("frame_", 0) != 0) continue;
    frame_files.emplace_back(std::stoll(stem.substr(6)), entry.path());
  }
  std::sort(frame_files.begin(), frame_files.end());
  const auto expected =
      static_cast<std::size_t>(manifest.render_full ? manifest.full_frames
                                                    : manifest.annotated_frames);
  if (frame_files.size() != expected)
    throw std::runtime_error("auto_annotate: " + std::to_string(frame_files.size()) +
                             " frames on disk, manifest expects " + std::to_string(expected));

  std::vector<PoseFrame> out;
  out.reserve(frame_files.size());
  const std::size_t chunk = 256;
  for (std::size_t start = 0; start < frame_files.size(); start += chunk) {
    const std::size_t count = std::min(chunk, frame_files.size() - start);
    std::vector<Image> images;
    images.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
      images.push_back(read_pgm(frame_files[start + i].second.string()));
    std::vector<PoseFrame> batch = refine_poses(backbone, elm, images);
    for (std::size_t i = 0; i < count; ++i) {
      batch[i].frame_id = frame_files[start + i].first;
      out.push_back(batch[i]);
    }
  }
  write_pose_csv(out, out_csv);
  return out;
}

/// Load a pose CSV into a T×16 series matrix ordered by frame id.
inline Matrix pose_series_matrix(const std::vector<PoseFrame>& frames) {
  Matrix series(frames.size(), kPoseDim);
  for (std::size_t r = 0; r < frames.size(); ++r)
    for (std::size_t c = 0; c < kPoseDim; ++c)
      series(r, c) = frames[r].coords[c];
  return series;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline nlohmann::json boxplot_json(const std::vector<double>& values) {
  BoxplotStats s = boxplot_stats(values);
  return {{"median", s.median},         {"q1", s.q1},
          {"q3", s.q3},                 {"whisker_lo", s.whisker_lo},
          {"whisker_hi", s.whisker_hi}, {"outliers", s.outliers}};
}

}  // namespace detail

/// Reduce the result files in `results_dir` into summary tables:
/// pose_models.csv (mean ± std per model row), grid_<cell>.csv (5×7 mean-MSE
/// grids), and boxplots.json (fold-MSE distributions). Missing or malformed
/// files are reported on stderr and skipped; an empty results directory is an
/// error listing what was expected.
inline void report(const std::string& results_dir, const std::string& out_dir,
                   const std::vector<std::size_t>& past_list = kGridPastDefaults,
                   const std::vector<std::size_t>& future_list = kGridFutureDefaults) {
  if (!fs::is_directory(results_dir))
    throw std::invalid_argument("report: results directory not found: " + results_dir);

  std::vector<std::string> pose_files, grid_files, bad_files;
  for (const auto& entry : fs::directory_iterator(results_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("pose_", 0) == 0 && name.size() > 5 && entry.path().extension() == ".json")
      pose_files.push_back(entry.path().string());
    else if (name.rfind("grid_", 0) == 0 && entry.path().extension() == ".json")
      grid_files.push_back(entry.path().string());
  }
  if (pose_files.empty() && grid_files.empty())
    throw std::invalid_argument(
        "report: no result files in " + results_dir +
        " (expected pose_<model>.json and/or grid_<cell>_n<n>_f<f>.json)");
  std::sort(pose_files.begin(), pose_files.end());
  std::sort(grid_files.begin(), grid_files.end());
  fs::create_directories(out_dir);

  // ---- Pose summary: one mean±std row per model ----
  nlohmann::json boxplots = nlohmann::json::object();
  if (!pose_files.empty()) {
    std::ofstream csv(fs::path(out_dir) / "pose_models.csv");
    csv << "model,mean_mse,std_mse,mean_mae,std_mae\n";
    for (const std::string& path : pose_files) {
      try {
        nlohmann::json j = read_result_json(path);
        const std::string model = j.at("context").at("model").get<std::string>();
        std::vector<double> fold_mse, fold_mae;
        for (const auto& rec : j.at("folds")) {
          fold_mse.push_back(rec.at("mse").get<double>());
          fold_mae.push_back(rec.at("mae").get<double>());
        }
        csv << model << ',' << detail::fmt_double(mean_of(fold_mse)) << ','
            << detail::fmt_double(stddev_of(fold_mse)) << ','
            << detail::fmt_double(mean_of(fold_mae)) << ','
            << detail::fmt_double(stddev_of(fold_mae)) << "\n";
        boxplots[model] = detail::boxplot_json(fold_mse);
      } catch (const std::exception& e) {
        bad_files.push_back(path + ": " + e.what());
      }
    }
  }

  // ---- Forecast grids: past × future mean-MSE grid per cell kind ----
  std::map<std::string, std::map<std::pair<std::size_t, std::size_t>, double>> grids;
  for (const std::string& path : grid_files) {
    try {
      nlohmann::json j = read_result_json(path);
      if (j.value("status", "ok") != "ok") {
        bad_files.push_back(path + ": recorded as failed (" + j.value("error", "?") + ")");
        continue;
      }
      const auto& ctx = j.at("context");
      grids[ctx.at("cell").get<std::string>()]
           [{ctx.at("n").get<std::size_t>(), ctx.at("f").get<std::size_t>()}] =
               j.at("mse").get<double>();
    } catch (const std::exception& e) {
      bad_files.push_back(path + ": " + e.what());
    }
  }
  for (const auto& [cell, table] : grids) {
    std::ofstream csv(fs::path(out_dir) / ("grid_" + cell + ".csv"));
    csv << "past";
    for (std::size_t f : future_list) csv << ",f" << f;
    csv << "\n";
    std::vector<double> cell_mses;
    for (std::size_t n : past_list) {
      csv << n;
      for (std::size_t f : future_list) {
        auto it = table.find({n, f});
        csv << ',';
        if (it != table.end()) {
          csv << detail::fmt_double(it->second);
          cell_mses.push_back(it->second);
        }
      }
      csv << "\n";
    }
    if (!cell_mses.empty()) boxplots["grid_" + cell] = detail::boxplot_json(cell_mses);
  }

  std::ofstream bj(fs::path(out_dir) / "boxplots.json");
  bj << boxplots.dump(2) << "\n";

  for (const std::string& msg : bad_files) std::cerr << "report: skipped " << msg << "\n";
}

}  // namespace armcast
