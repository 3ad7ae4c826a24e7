// armcast: synthetic robotic-arm pose estimation and movement forecasting
// pipeline. Subcommands: synth, train-pose, elm-sweep, elm-train, annotate,
// train-forecast, grid-search, report.
//
// Exit codes: 0 success, 2 config/validation error, 3 I/O error,
// 4 numerical failure (non-finite loss).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "armcast/dataset.hpp"
#include "armcast/harness.hpp"
#include "armcast/model_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

// ---- structured stderr logging: `ts level event key=value...` -------------

std::string log_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void log_line(const char* level, const std::string& event,
              const std::vector<std::pair<std::string, std::string>>& kv = {}) {
  std::cerr << log_timestamp() << ' ' << level << ' ' << event;
  for (const auto& [k, v] : kv) std::cerr << ' ' << k << '=' << v;
  std::cerr << '\n';
}

void log_info(const std::string& event,
              const std::vector<std::pair<std::string, std::string>>& kv = {}) {
  log_line("INFO", event, kv);
}

void log_error(const std::string& event,
               const std::vector<std::pair<std::string, std::string>>& kv = {}) {
  log_line("ERROR", event, kv);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---- config file handling --------------------------------------------------

/// Flat per-subcommand JSON sections; unknown keys in a consumed section are
/// rejected. Flags always win over file values.
struct ConfigSection {
  json section = json::object();
  std::set<std::string> known;

  static ConfigSection load(const std::string& config_path, const std::string& subcommand) {
    ConfigSection c;
    if (config_path.empty()) return c;
    std::ifstream in(config_path);
    if (!in) throw std::invalid_argument("config: cannot open " + config_path);
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: invalid JSON in " + config_path + ": " + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("config: top level must be an object");
    if (doc.contains(subcommand)) {
      if (!doc[subcommand].is_object())
        throw std::invalid_argument("config: section '" + subcommand + "' must be an object");
      c.section = doc[subcommand];
    }
    return c;
  }

  template <typename T>
  void apply(const CLI::Option* opt, const std::string& key, T& value) {
    known.insert(key);
    if (opt != nullptr && opt->count() > 0) return;  // flag wins
    if (!section.contains(key)) return;
    try {
      value = section.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: bad value for key '" + key + "': " + e.what());
    }
  }

  void reject_unknown() const {
    for (const auto& [key, value] : section.items())
      if (!known.contains(key))
        throw std::invalid_argument("config: unknown key '" + key + "'");
  }
};

/// Every run writes the resolved configuration that produced it beside its
/// outputs, keyed by subcommand.
void write_resolved_config(const std::string& dir, const std::string& subcommand,
                           const json& resolved) {
  if (!dir.empty()) fs::create_directories(dir);
  const fs::path path = fs::path(dir) / (subcommand + ".config.json");
  std::ofstream out(path);
  out << json{{subcommand, resolved}}.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write resolved config " + path.string());
}

std::uint64_t env_seed_default() {
  if (const char* env = std::getenv("ARMCAST_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw std::invalid_argument("ARMCAST_SEED must be an unsigned integer");
    return v;
  }
  return 1;
}

std::vector<std::size_t> parse_size_list(const std::string& csv, const std::string& what) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    try {
      out.push_back(std::stoull(csv.substr(pos, next - pos)));
    } catch (const std::exception&) {
      throw std::invalid_argument(what + ": bad list entry in '" + csv + "'");
    }
    pos = next + 1;
  }
  if (out.empty()) throw std::invalid_argument(what + ": empty list");
  return out;
}

// ---- shared dataset loading -------------------------------------------------

/// Annotated split of a dataset: frames (by annotated frame id) + noisy
/// keypoint targets.
void load_annotated(const std::string& data_dir, std::vector<armcast::Image>& images,
                    armcast::Matrix& targets) {
  const auto poses =
      armcast::read_pose_csv((fs::path(data_dir) / "poses_annotated.csv").string());
  if (poses.empty()) throw std::runtime_error("no annotated poses in " + data_dir);
  images.clear();
  targets = armcast::Matrix(poses.size(), armcast::kPoseDim);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    images.push_back(armcast::read_pgm(
        (fs::path(data_dir) / "frames" / armcast::frame_filename(poses[i].frame_id)).string()));
    for (std::size_t d = 0; d < armcast::kPoseDim; ++d) targets(i, d) = poses[i].coords[d];
  }
}

armcast::Matrix load_series(const std::string& csv_path) {
  return armcast::pose_series_matrix(armcast::read_pose_csv(csv_path));
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"armcast: robotic-arm pose estimation and movement forecasting pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // allow the global --config after the subcommand name
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file with per-subcommand sections")
      ->expected(1);

  // ---- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic arm dataset");
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  double synth_duration = 60.0, synth_fps = 20.0, synth_noise = 1.0, synth_subsample = 1.0;
  std::size_t synth_render = 96;
  bool synth_render_full = false, synth_force = false;
  auto* synth_out_opt = synth->add_option("--out", synth_out, "Output dataset directory");
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "PRNG seed");
  auto* synth_duration_opt = synth->add_option("--duration", synth_duration, "Sequence length, seconds");
  auto* synth_fps_opt = synth->add_option("--fps", synth_fps, "Capture rate, frames per second");
  auto* synth_noise_opt = synth->add_option("--noise-sigma", synth_noise, "Annotation noise, pixels");
  auto* synth_render_opt = synth->add_option("--render-size", synth_render, "Square frame side, pixels");
  auto* synth_sub_opt =
      synth->add_option("--subsample-hz", synth_subsample, "Annotated frames per second");
  auto* synth_full_opt =
      synth->add_flag("--render-full", synth_render_full, "Render every frame, not only annotated");
  synth->add_flag("--force", synth_force, "Overwrite an existing dataset");

  // ---- train-pose ----------------------------------------------------------
  auto* tpose = app.add_subcommand("train-pose", "Cross-validated backbone training");
  std::string tpose_data, tpose_out, tpose_variant = "scconv";
  std::uint64_t tpose_seed = 0;
  std::size_t tpose_epochs = 500, tpose_batch = 8, tpose_folds = 5, tpose_input = 96;
  double tpose_lr = 1e-4;
  auto* tpose_data_opt = tpose->add_option("--data", tpose_data, "Dataset directory");
  auto* tpose_out_opt = tpose->add_option("--out", tpose_out, "Output directory");
  auto* tpose_variant_opt = tpose->add_option("--variant", tpose_variant, "scconv or plain");
  auto* tpose_epochs_opt = tpose->add_option("--epochs", tpose_epochs, "Training epochs");
  auto* tpose_lr_opt = tpose->add_option("--lr", tpose_lr, "Adam learning rate");
  auto* tpose_batch_opt = tpose->add_option("--batch", tpose_batch, "Batch size");
  auto* tpose_folds_opt = tpose->add_option("--folds", tpose_folds, "Cross-validation folds");
  auto* tpose_input_opt = tpose->add_option("--input-size", tpose_input, "Backbone input side, pixels");
  auto* tpose_seed_opt = tpose->add_option("--seed", tpose_seed, "PRNG seed");

  // ---- elm-sweep -----------------------------------------------------------
  auto* sweep = app.add_subcommand("elm-sweep", "Neuron sweep over ELM kernels");
  std::string sweep_data, sweep_backbone, sweep_out, sweep_kernels = "linear,tanh,rbf,rbf_l2";
  std::size_t sweep_min = 100, sweep_max = 1000, sweep_step = 50, sweep_folds = 5;
  double sweep_lambda = 1e-3;
  std::uint64_t sweep_seed = 0;
  auto* sweep_data_opt = sweep->add_option("--data", sweep_data, "Dataset directory");
  auto* sweep_backbone_opt = sweep->add_option("--backbone", sweep_backbone, "Backbone model file");
  auto* sweep_out_opt = sweep->add_option("--out", sweep_out, "Output directory");
  auto* sweep_kernels_opt = sweep->add_option("--kernels", sweep_kernels, "Comma-separated kernel list");
  auto* sweep_min_opt = sweep->add_option("--min", sweep_min, "Minimum hidden neurons");
  auto* sweep_max_opt = sweep->add_option("--max", sweep_max, "Maximum hidden neurons");
  auto* sweep_step_opt = sweep->add_option("--step", sweep_step, "Neuron-count step");
  auto* sweep_folds_opt = sweep->add_option("--folds", sweep_folds, "Cross-validation folds");
  auto* sweep_lambda_opt = sweep->add_option("--lambda", sweep_lambda, "Ridge strength for rbf_l2");
  auto* sweep_seed_opt = sweep->add_option("--seed", sweep_seed, "PRNG seed");

  // ---- elm-train -----------------------------------------------------------
  auto* etrain = app.add_subcommand("elm-train", "Train an ELM refinement head");
  std::string etrain_data, etrain_backbone, etrain_out, etrain_kernel = "rbf_l2";
  std::size_t etrain_hidden = 1000;
  double etrain_lambda = 1e-3;
  std::uint64_t etrain_seed = 0;
  auto* etrain_data_opt = etrain->add_option("--data", etrain_data, "Dataset directory");
  auto* etrain_backbone_opt = etrain->add_option("--backbone", etrain_backbone, "Backbone model file");
  auto* etrain_out_opt = etrain->add_option("--out", etrain_out, "Output directory");
  auto* etrain_kernel_opt = etrain->add_option("--kernel", etrain_kernel, "linear|tanh|rbf|rbf_l2");
  auto* etrain_hidden_opt = etrain->add_option("--n-hidden", etrain_hidden, "Hidden neuron count");
  auto* etrain_lambda_opt = etrain->add_option("--lambda", etrain_lambda, "Ridge strength (rbf_l2)");
  auto* etrain_seed_opt = etrain->add_option("--seed", etrain_seed, "PRNG seed");

  // ---- annotate ------------------------------------------------------------
  auto* annotate = app.add_subcommand("annotate", "Auto-annotate every rendered frame");
  std::string ann_data, ann_backbone, ann_elm, ann_out;
  auto* ann_data_opt = annotate->add_option("--data", ann_data, "Dataset directory");
  auto* ann_backbone_opt = annotate->add_option("--backbone", ann_backbone, "Backbone model file");
  auto* ann_elm_opt = annotate->add_option("--elm", ann_elm, "ELM model file");
  auto* ann_out_opt = annotate->add_option("--out", ann_out, "Output pose CSV path");

  // ---- train-forecast --------------------------------------------------------
  auto* tfore = app.add_subcommand("train-forecast", "Train one encoder-decoder forecaster");
  std::string tfore_series, tfore_out, tfore_cell = "lstm";
  std::size_t tfore_n = 10, tfore_f = 5, tfore_epochs = 500, tfore_batch = 256, tfore_hidden = 64,
              tfore_stride = 1;
  double tfore_lr = 1e-4;
  std::uint64_t tfore_seed = 0;
  auto* tfore_series_opt = tfore->add_option("--series", tfore_series, "Pose series CSV");
  auto* tfore_out_opt = tfore->add_option("--out", tfore_out, "Output directory");
  auto* tfore_cell_opt = tfore->add_option("--cell", tfore_cell, "lstm or gru");
  auto* tfore_n_opt = tfore->add_option("--n", tfore_n, "Past window length");
  auto* tfore_f_opt = tfore->add_option("--f", tfore_f, "Future window length");
  auto* tfore_epochs_opt = tfore->add_option("--epochs", tfore_epochs, "Training epochs");
  auto* tfore_lr_opt = tfore->add_option("--lr", tfore_lr, "Adam learning rate");
  auto* tfore_batch_opt = tfore->add_option("--batch", tfore_batch, "Batch size");
  auto* tfore_hidden_opt = tfore->add_option("--hidden", tfore_hidden, "Recurrent hidden size");
  auto* tfore_stride_opt = tfore->add_option("--stride", tfore_stride, "Window stride");
  auto* tfore_seed_opt = tfore->add_option("--seed", tfore_seed, "PRNG seed");

  // ---- grid-search -----------------------------------------------------------
  auto* grid = app.add_subcommand("grid-search", "Past/future grid search, resumable");
  std::string grid_series, grid_results, grid_cells = "lstm,gru";
  std::string grid_past = "10,20,30,45,60", grid_future = "1,5,15,30,60,90,120";
  std::size_t grid_epochs = 500, grid_batch = 256, grid_hidden = 64, grid_stride = 1;
  std::size_t grid_workers = std::max(1u, std::thread::hardware_concurrency());
  double grid_lr = 1e-4;
  std::uint64_t grid_seed = 0;
  auto* grid_series_opt = grid->add_option("--series", grid_series, "Pose series CSV");
  auto* grid_results_opt = grid->add_option("--results", grid_results, "Result-file directory");
  auto* grid_cells_opt = grid->add_option("--cells", grid_cells, "Comma-separated cell kinds");
  auto* grid_past_opt = grid->add_option("--past", grid_past, "Comma-separated past windows");
  auto* grid_future_opt = grid->add_option("--future", grid_future, "Comma-separated future windows");
  auto* grid_epochs_opt = grid->add_option("--epochs", grid_epochs, "Training epochs per cell");
  auto* grid_lr_opt = grid->add_option("--lr", grid_lr, "Adam learning rate");
  auto* grid_batch_opt = grid->add_option("--batch", grid_batch, "Batch size");
  auto* grid_hidden_opt = grid->add_option("--hidden", grid_hidden, "Recurrent hidden size");
  auto* grid_stride_opt = grid->add_option("--stride", grid_stride, "Window stride");
  auto* grid_workers_opt = grid->add_option("--workers", grid_workers, "Parallel training workers");
  auto* grid_seed_opt = grid->add_option("--seed", grid_seed, "PRNG seed");

  // ---- report ----------------------------------------------------------------
  auto* rep = app.add_subcommand("report", "Reduce result files into tables");
  std::string rep_results, rep_out;
  std::string rep_past = "10,20,30,45,60", rep_future = "1,5,15,30,60,90,120";
  auto* rep_results_opt = rep->add_option("--results", rep_results, "Result-file directory");
  auto* rep_out_opt = rep->add_option("--out", rep_out, "Output table directory");
  auto* rep_past_opt = rep->add_option("--past", rep_past, "Grid row labels");
  auto* rep_future_opt = rep->add_option("--future", rep_future, "Grid column labels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();

    if (app.got_subcommand(synth)) {
      ConfigSection cfg = ConfigSection::load(config_path, "synth");
      cfg.apply(synth_out_opt, "out", synth_out);
      cfg.apply(synth_seed_opt, "seed", synth_seed);
      cfg.apply(synth_duration_opt, "duration", synth_duration);
      cfg.apply(synth_fps_opt, "fps", synth_fps);
      cfg.apply(synth_noise_opt, "noise_sigma", synth_noise);
      cfg.apply(synth_render_opt, "render_size", synth_render);
      cfg.apply(synth_sub_opt, "subsample_hz", synth_subsample);
      cfg.apply(synth_full_opt, "render_full", synth_render_full);
      cfg.reject_unknown();
      if (synth_out.empty()) throw std::invalid_argument("synth: --out is required");
      if (synth_seed_opt->count() == 0 && !cfg.section.contains("seed"))
        synth_seed = env_seed_default();

      armcast::SynthConfig sc;
      sc.seed = synth_seed;
      sc.fps = synth_fps;
      sc.duration_s = synth_duration;
      sc.noise_sigma = synth_noise;
      sc.render_size = static_cast<int>(synth_render);
      sc.annotation_subsample_hz = synth_subsample;
      sc.render_full = synth_render_full;
      sc.validate();

      log_info("synth.start", {{"out", synth_out}, {"seed", std::to_string(synth_seed)}});
      const armcast::DatasetManifest manifest = armcast::synth_dataset(
          sc, armcast::default_arm(), armcast::default_camera(sc.render_size), synth_out,
          synth_force);
      write_resolved_config(synth_out, "synth",
                            {{"out", synth_out},
                             {"seed", synth_seed},
                             {"duration", synth_duration},
                             {"fps", synth_fps},
                             {"noise_sigma", synth_noise},
                             {"render_size", synth_render},
                             {"subsample_hz", synth_subsample},
                             {"render_full", synth_render_full}});
      log_info("synth.done", {{"full_frames", std::to_string(manifest.full_frames)},
                              {"annotated_frames", std::to_string(manifest.annotated_frames)},
                              {"wall_time_s", fmt(seconds_since(t0))}});
      return 0;
    }

    if (app.got_subcommand(tpose)) {
      ConfigSection cfg = ConfigSection::load(config_path, "train-pose");
      cfg.apply(tpose_data_opt, "data", tpose_data);
      cfg.apply(tpose_out_opt, "out", tpose_out);
      cfg.apply(tpose_variant_opt, "variant", tpose_variant);
      cfg.apply(tpose_epochs_opt, "epochs", tpose_epochs);
      cfg.apply(tpose_lr_opt, "lr", tpose_lr);
      cfg.apply(tpose_batch_opt, "batch", tpose_batch);
      cfg.apply(tpose_folds_opt, "folds", tpose_folds);
      cfg.apply(tpose_input_opt, "input_size", tpose_input);
      cfg.apply(tpose_seed_opt, "seed", tpose_seed);
      cfg.reject_unknown();
      if (tpose_data.empty() || tpose_out.empty())
        throw std::invalid_argument("train-pose: --data and --out are required");
      if (tpose_seed_opt->count() == 0 && !cfg.section.contains("seed"))
        tpose_seed = env_seed_default();

      armcast::PoseTrainHyper hyper;
      hyper.epochs = tpose_epochs;
      hyper.lr = tpose_lr;
      hyper.batch = tpose_batch;
      hyper.folds = tpose_folds;
      hyper.seed = tpose_seed;
      hyper.variant = armcast::backbone_variant_from_string(tpose_variant);
      hyper.input_size = tpose_input;

      std::vector<armcast::Image> images;
      armcast::Matrix targets;
      load_annotated(tpose_data, images, targets);
      log_info("train-pose.start", {{"samples", std::to_string(images.size())},
                                    {"variant", tpose_variant},
                                    {"epochs", std::to_string(tpose_epochs)}});
      armcast::PoseTrainResult result = armcast::train_pose(images, targets, hyper);

      fs::create_directories(tpose_out);
      json doc;
      doc["context"] = {{"model", tpose_variant + "_head"}};
      doc["folds"] = json::array();
      for (const auto& rec : result.records)
        doc["folds"].push_back({{"fold", rec.fold}, {"mse", rec.mse}, {"mae", rec.mae}});
      doc["mean_mse"] = result.mean_mse;
      doc["std_mse"] = result.std_mse;
      doc["mean_mae"] = result.mean_mae;
      doc["std_mae"] = result.std_mae;
      doc["seed"] = tpose_seed;
      doc["wall_time_s"] = seconds_since(t0);
      armcast::write_result_json(
          (fs::path(tpose_out) / ("pose_" + tpose_variant + "_head.json")).string(), doc);
      for (std::size_t f = 0; f < result.fold_models.size(); ++f)
        armcast::save_backbone((fs::path(tpose_out) /
                                ("backbone_" + tpose_variant + "_fold" + std::to_string(f) +
                                 ".armf1"))
                                   .string(),
                               result.fold_models[f]);
      write_resolved_config(tpose_out, "train-pose",
                            {{"data", tpose_data},
                             {"out", tpose_out},
                             {"variant", tpose_variant},
                             {"epochs", tpose_epochs},
                             {"lr", tpose_lr},
                             {"batch", tpose_batch},
                             {"folds", tpose_folds},
                             {"input_size", tpose_input},
                             {"seed", tpose_seed}});
      log_info("train-pose.done", {{"mean_mse", fmt(result.mean_mse)},
                                   {"mean_mae", fmt(result.mean_mae)},
                                   {"wall_time_s", fmt(seconds_since(t0))}});
      return 0;
    }

    if (app.got_subcommand(sweep)) {
      ConfigSection cfg = ConfigSection::load(config_path, "elm-sweep");
      cfg.apply(sweep_data_opt, "data", sweep_data);
      cfg.apply(sweep_backbone_opt, "backbone", sweep_backbone);
      cfg.apply(sweep_out_opt, "out", sweep_out);
      cfg.apply(sweep_kernels_opt, "kernels", sweep_kernels);
      cfg.apply(sweep_min_opt, "min", sweep_min);
      cfg.apply(sweep_max_opt, "max", sweep_max);
      cfg.apply(sweep_step_opt, "step", sweep_step);
      cfg.apply(sweep_folds_opt, "folds", sweep_folds);
      cfg.apply(sweep_lambda_opt, "lambda", sweep_lambda);
      cfg.apply(sweep_seed_opt, "seed", sweep_seed);
      cfg.reject_unknown();
      if (sweep_data.empty() || sweep_backbone.empty() || sweep_out.empty())
        throw std::invalid_argument("elm-sweep: --data, --backbone and --out are required");
      if (sweep_seed_opt->count() == 0 && !cfg.section.contains("seed"))
        sweep_seed = env_seed_default();

      std::vector<armcast::ElmKernel> kernels;
      std::size_t pos = 0;
      while (pos < sweep_kernels.size()) {
        std::size_t next = sweep_kernels.find(',', pos);
        if (next == std::string::npos) next = sweep_kernels.size();
        kernels.push_back(armcast::elm_kernel_from_string(sweep_kernels.substr(pos, next - pos)));
        pos = next + 1;
      }

      armcast::BackboneModel backbone = armcast::load_backbone(sweep_backbone);
      std::vector<armcast::Image> images;
      armcast::Matrix targets;
      load_annotated(sweep_data, images, targets);
      log_info("elm-sweep.start", {{"samples", std::to_string(images.size())},
                                   {"kernels", sweep_kernels}});
      armcast::Matrix features = armcast::extract_features(backbone, images);
      std::vector<armcast::SweepRecord> records = armcast::neuron_sweep(
          features, targets, kernels, sweep_min, sweep_max, sweep_step, sweep_folds, sweep_seed,
          sweep_lambda);

      fs::create_directories(sweep_out);
      const fs::path csv_path = fs::path(sweep_out) / "sweep.csv";
      std::ofstream csv(csv_path);
      csv << "kernel,n_hidden,fold,mse,mae\n";
      for (const auto& r : records) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.6f,%.6f\n", to_string(r.kernel).c_str(),
                      r.n_hidden, r.fold, r.mse, r.mae);
        csv << buf;
      }
      if (!csv) throw std::runtime_error("elm-sweep: cannot write " + csv_path.string());
      write_resolved_config(sweep_out, "elm-sweep",
                            {{"data", sweep_data},
                             {"backbone", sweep_backbone},
                             {"out", sweep_out},
                             {"kernels", sweep_kernels},
                             {"min", sweep_min},
                             {"max", sweep_max},
                             {"step", sweep_step},
                             {"folds", sweep_folds},
                             {"lambda", sweep_lambda},
                             {"seed", sweep_seed}});
      log_info("elm-sweep.done", {{"rows", std::to_string(records.size())},
                                  {"wall_time_s", fmt(seconds_since(t0))}});
      return 0;
    }

    if (app.got_subcommand(etrain)) {
      ConfigSection cfg = ConfigSection::load(config_path, "elm-train");
      cfg.apply(etrain_data_opt, "data", etrain_data);
      cfg.apply(etrain_backbone_opt, "backbone", etrain_backbone);
      cfg.apply(etrain_out_opt, "out", etrain_out);
      cfg.apply(etrain_kernel_opt, "kernel", etrain_kernel);
      cfg.apply(etrain_hidden_opt, "n_hidden", etrain_hidden);
      cfg.apply(etrain_lambda_opt, "lambda", etrain_lambda);
      cfg.apply(etrain_seed_opt, "seed", etrain_seed);
      cfg.reject_unknown();
      if (etrain_data.empty() || etrain_backbone.empty() || etrain_out.empty())
        throw std::invalid_argument("elm-train: --data, --backbone and --out are required");
      if (etrain_seed_opt->count() == 0 && !cfg.section.contains("seed"))
        etrain_seed = env_seed_default();

      const armcast::ElmKernel kernel = armcast::elm_kernel_from_string(etrain_kernel);
      const double lambda = kernel == armcast::ElmKernel::kRbfL2 ? etrain_lambda : 0.0;

      armcast::BackboneModel backbone = armcast::load_backbone(etrain_backbone);
      std::vector<armcast::Image> images;
      armcast::Matrix targets;
      load_annotated(etrain_data, images, targets);
      log_info("elm-train.start", {{"samples", std::to_string(images.size())},
                                   {"kernel", etrain_kernel},
                                   {"n_hidden", std::to_string(etrain_hidden)}});
      armcast::Matrix features = armcast::extract_features(backbone, images);
      armcast::ElmModel elm =
          armcast::elm_train(features, targets, kernel, etrain_hidden, lambda, etrain_seed);
      elm.backbone_hash = backbone.param_hash();

      armcast::Matrix pred = armcast::elm_predict(elm, features);
      std::vector<double> y(targets.data(), targets.data() + targets.size());
      std::vector<double> p(pred.data(), pred.data() + pred.size());

      fs::create_directories(etrain_out);
      armcast::save_elm((fs::path(etrain_out) / ("elm_" + etrain_kernel + ".armf1")).string(), elm);
      json doc;
      doc["context"] = {{"model", "elm_" + etrain_kernel}};
      doc["mse"] = armcast::mse(y, p);
      doc["mae"] = armcast::mae(y, p);
      doc["seed"] = etrain_seed;
      doc["wall_time_s"] = seconds_since(t0);
      armcast::write_result_json(
          (fs::path(etrain_out) / ("elm_" + etrain_kernel + "_train.json")).string(), doc);
      write_resolved_config(etrain_out, "elm-train",
                            {{"data", etrain_data},
                             {"backbone", etrain_backbone},
                             {"out", etrain_out},
                             {"kernel", etrain_kernel},
                             {"n_hidden", etrain_hidden},
                             {"lambda", etrain_lambda},
                             {"seed", etrain_seed}});
      log_info("elm-train.done", {{"train_mse", fmt(doc["mse"].get<double>())},
                                  {"wall_time_s", fmt(seconds_since(t0))}});
      return 0;
    }

    if (app.got_subcommand(annotate)) {
      ConfigSection cfg = ConfigSection::load(config_path, "annotate");
      cfg.apply(ann_data_opt, "data", ann_data);
      cfg.apply(ann_backbone_opt, "backbone", ann_backbone);
      cfg.apply(ann_elm_opt, "elm", ann_elm);
      cfg.apply(ann_out_opt, "out", ann_out);
      cfg.reject_unknown();
      if (ann_data.empty() || ann_backbone.empty() || ann_elm.empty() || ann_out.empty())
        throw std::invalid_argument("annotate: --data, --backbone, --elm and --out are required");

      armcast::BackboneModel backbone = armcast::load_backbone(ann_backbone);
      armcast::ElmModel elm = armcast::load_elm(ann_elm);
      if (fs::path(ann_out).has_parent_path())
        fs::create_directories(fs::path(ann_out).parent_path());
      log_info("annotate.start", {{"data", ann_data}});
      std::vector<armcast::PoseFrame> frames =
          armcast::auto_annotate(backbone, elm, ann_data, ann_out);
      write_resolved_config(fs::path(ann_out).parent_path().string(), "annotate",
                            {{"data", ann_data},
                             {"backbone", ann_backbone},
                             {"elm", ann_elm},
                             {"out", ann_out}});
      log_info("annotate.done", {{"frames", std::to_string(frames.size())},
                                 {"wall_time_s", fmt(seconds_since(t0))}});
      return 0;
    }

    if (app.got_subcommand(tfore)) {
      ConfigSection cfg = ConfigSection::load(config_path, "train-forecast");
      cfg.apply(tfore_series_opt, "series", tfore_series);
      cfg.apply(tfore_out_opt, "out", tfore_out);
      cfg.apply(tfore_cell_opt, "cell", tfore_cell);
      cfg.apply(tfore_n_opt, "n", tfore_n);
      cfg.apply(tfore_f_opt, "f", tfore_f);
      cfg.apply(tfore_epochs_opt, "epochs", tfore_epochs);
      cfg.apply(tfore_lr_opt, "lr", tfore_lr);
      cfg.apply(tfore_batch_opt, "batch", tfore_batch);
      cfg.apply(tfore_hidden_opt, "hidden", tfore_hidden);
      cfg.apply(tfore_stride_opt, "stride", tfore_stride);
      cfg.apply(tfore_seed_opt, "seed", tfore_seed);
      cfg.reject_unknown();
      if (tfore_series.empty() || tfore_out.empty())
        throw std::invalid_argument("train-forecast: --series and --out are required");
      if (tfore_seed_opt->count() == 0 && !cfg.section.contains("seed"))
        tfore_seed = env_seed_default();

      const armcast::RnnCell cell = armcast::rnn_cell_from_string(tfore_cell);
      armcast::ForecastHyper hyper;
      hyper.epochs = tfore_epochs;
      hyper.lr = tfore_lr;
      hyper.batch = tfore_batch;
      hyper.hidden = tfore_hidden;
      hyper.stride = tfore_stride;
      hyper.seed = tfore_seed;

      armcast::Matrix series = load_series(tfore_series);
      log_info("train-forecast.start", {{"frames", std::to_string(series.rows())},
                                        {"cell", tfore_cell},
                                        {"n", std::to_string(tfore_n)},
                                        {"f", std::to_string(tfore_f)}});
      armcast::ForecastResult res = armcast::train_forecast(series, cell, tfore_n, tfore_f, hyper);

      fs::create_directories(tfore_out);
      armcast::save_forecast((fs::path(tfore_out) /
                              ("forecast_" + tfore_cell + "_n" + std::to_string(tfore_n) + "_f" +
                               std::to_string(tfore_f) + ".armf1"))
                                 .string(),
                             res.model);
      json doc;
      doc["context"] = {{"cell", tfore_cell}, {"n", tfore_n}, {"f", tfore_f}};
      doc["status"] = "ok";
      doc["mse"] = res.val_mse;
      doc["mae"] = res.val_mae;
      doc["seed"] = tfore_seed;
      doc["wall_time_s"] = seconds_since(t0);
      armcast::write_result_json(
          (fs::path(tfore_out) / armcast::grid_result_filename(cell, tfore_n, tfore_f)).string(),
          doc);
      write_resolved_config(tfore_out, "train-forecast",
                            {{"series", tfore_series},
                             {"out", tfore_out},
                             {"cell", tfore_cell},
                             {"n", tfore_n},
                             {"f", tfore_f},
                             {"epochs", tfore_epochs},
                             {"lr", tfore_lr},
                             {"batch", tfore_batch},
                             {"hidden", tfore_hidden},
                             {"stride", tfore_stride},
                             {"seed", tfore_seed}});
      log_info("train-forecast.done", {{"val_mse", fmt(res.val_mse)},
                                       {"val_mae", fmt(res.val_mae)},
                                       {"wall_time_s", fmt(seconds_since(t0))}});
      return 0;
    }

    if (app.got_subcommand(grid)) {
      ConfigSection cfg = ConfigSection::load(config_path, "grid-search");
      cfg.apply(grid_series_opt, "series", grid_series);
      cfg.apply(grid_results_opt, "results", grid_results);
      cfg.apply(grid_cells_opt, "cells", grid_cells);
      cfg.apply(grid_past_opt, "past", grid_past);
      cfg.apply(grid_future_opt, "future", grid_future);
      cfg.apply(grid_epochs_opt, "epochs", grid_epochs);
      cfg.apply(grid_lr_opt, "lr", grid_lr);
      cfg.apply(grid_batch_opt, "batch", grid_batch);
      cfg.apply(grid_hidden_opt, "hidden", grid_hidden);
      cfg.apply(grid_stride_opt, "stride", grid_stride);
      cfg.apply(grid_workers_opt, "workers", grid_workers);
      cfg.apply(grid_seed_opt, "seed", grid_seed);
      cfg.reject_unknown();
      if (grid_series.empty() || grid_results.empty())
        throw std::invalid_argument("grid-search: --series and --results are required");
      if (grid_seed_opt->count() == 0 && !cfg.section.contains("seed"))
        grid_seed = env_seed_default();

      std::vector<armcast::RnnCell> cells;
      std::size_t pos = 0;
      while (pos < grid_cells.size()) {
        std::size_t next = grid_cells.find(',', pos);
        if (next == std::string::npos) next = grid_cells.size();
        cells.push_back(armcast::rnn_cell_from_string(grid_cells.substr(pos, next - pos)));
        pos = next + 1;
      }
      const std::vector<std::size_t> past = parse_size_list(grid_past, "grid-search --past");
      const std::vector<std::size_t> future = parse_size_list(grid_future, "grid-search --future");

      armcast::ForecastHyper hyper;
      hyper.epochs = grid_epochs;
      hyper.lr = grid_lr;
      hyper.batch = grid_batch;
      hyper.hidden = grid_hidden;
      hyper.stride = grid_stride;

      armcast::Matrix series = load_series(grid_series);
      log_info("grid-search.start",
               {{"frames", std::to_string(series.rows())},
                {"cells", grid_cells},
                {"runs", std::to_string(cells.size() * past.size() * future.size())},
                {"workers", std::to_string(grid_workers)}});
      armcast::GridSearchOutcome outcome = armcast::grid_search(
          series, cells, past, future, hyper, grid_seed, grid_results, grid_workers);
      write_resolved_config(grid_results, "grid-search",
                            {{"series", grid_series},
                             {"results", grid_results},
                             {"cells", grid_cells},
                             {"past", grid_past},
                             {"future", grid_future},
                             {"epochs", grid_epochs},
                             {"lr", grid_lr},
                             {"batch", grid_batch},
                             {"hidden", grid_hidden},
                             {"stride", grid_stride},
                             {"workers", grid_workers},
                             {"seed", grid_seed}});
      log_info("grid-search.done", {{"executed", std::to_string(outcome.executed)},
                                    {"skipped", std::to_string(outcome.skipped)},
                                    {"failed", std::to_string(outcome.failed)},
                                    {"wall_time_s", fmt(seconds_since(t0))}});
      return 0;
    }

    if (app.got_subcommand(rep)) {
      ConfigSection cfg = ConfigSection::load(config_path, "report");
      cfg.apply(rep_results_opt, "results", rep_results);
      cfg.apply(rep_out_opt, "out", rep_out);
      cfg.apply(rep_past_opt, "past", rep_past);
      cfg.apply(rep_future_opt, "future", rep_future);
      cfg.reject_unknown();
      if (rep_results.empty() || rep_out.empty())
        throw std::invalid_argument("report: --results and --out are required");

      log_info("report.start", {{"results", rep_results}});
      armcast::report(rep_results, rep_out, parse_size_list(rep_past, "report --past"),
                      parse_size_list(rep_future, "report --future"));
      write_resolved_config(rep_out, "report",
                            {{"results", rep_results},
                             {"out", rep_out},
                             {"past", rep_past},
                             {"future", rep_future}});
      log_info("report.done", {{"out", rep_out}, {"wall_time_s", fmt(seconds_since(t0))}});
      return 0;
    }

    throw std::invalid_argument("no subcommand selected");
  } catch (const armcast::NumericalError& e) {
    log_error("numerical_failure", {{"error", std::string("\"") + e.what() + "\""}});
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    log_error("config_error", {{"error", std::string("\"") + e.what() + "\""}});
    return kExitConfig;
  } catch (const std::exception& e) {
    log_error("io_error", {{"error", std::string("\"") + e.what() + "\""}});
    return kExitIo;
  }
}
