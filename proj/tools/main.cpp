// Copyright (c) 2026 The pcseg authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "pcseg/config.hpp"
#include "pcseg/io_error.hpp"
#include "pcseg/merge.hpp"
#include "pcseg/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string ablation;
  double bandwidth = 0.0;
  bool dump = false;

  CLI::Option* opt_config = nullptr;
  CLI::Option* opt_seed = nullptr;
  CLI::Option* opt_jobs = nullptr;
  CLI::Option* opt_ablation = nullptr;
  CLI::Option* opt_bandwidth = nullptr;
  CLI::Option* opt_dump = nullptr;

  void attach(CLI::App* cmd) {
    opt_config = cmd->add_option("--config", config_path, "JSON configuration file");
    opt_seed = cmd->add_option("--seed", seed, "Random seed (overrides the config)");
    opt_jobs = cmd->add_option("--jobs", jobs, "Concurrent scenes (overrides the config)");
    opt_ablation = cmd->add_option("--ablation", ablation,
                                   "Energy terms: unary, pairwise, or full");
    opt_bandwidth =
        cmd->add_option("--bandwidth", bandwidth, "Mode clustering bandwidth override");
    opt_dump = cmd->add_flag("--dump-intermediate", dump,
                             "Write per-stage artifacts next to the results");
  }

  pcseg::RunConfig resolve() const {
    pcseg::RunConfig config;
    if (!config_path.empty()) config = pcseg::load_run_config(config_path);
    if (opt_seed->count() > 0) config.seed = seed;
    if (opt_jobs->count() > 0) config.jobs = jobs;
    if (opt_ablation->count() > 0) config.crf.mode = pcseg::parse_crf_mode(ablation);
    if (opt_bandwidth->count() > 0) config.meanshift.bandwidth = bandwidth;
    if (opt_dump->count() > 0) config.dump_intermediate = true;
    config.validate();
    return config;
  }
};

std::string sibling_labels_path(const std::string& scene_path) {
  fs::path p(scene_path);
  p.replace_extension(".labels");
  return p.string();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pcseg::IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw pcseg::IoError("failed writing " + path);
}

void maybe_dump_config(const pcseg::RunConfig& config, const std::string& out_dir) {
  if (!config.dump_intermediate) return;
  write_text_file((fs::path(out_dir) / "run_config.json").string(),
                  pcseg::run_config_json(config));
}

std::vector<std::string> resolve_class_names(const pcseg::PointCloud& cloud,
                                             const pcseg::RunConfig& config) {
  return cloud.class_names.empty() ? config.synth.class_names : cloud.class_names;
}

int run_synth(const pcseg::RunConfig& config, const std::string& out_dir) {
  const pcseg::DatasetPaths paths = pcseg::write_dataset(out_dir, config);
  maybe_dump_config(config, out_dir);
  std::cerr << "synthesized " << paths.train_scenes.size() << " train and "
            << paths.test_scenes.size() << " test scenes under " << out_dir << "\n";
  return 0;
}

pcseg::PointCloud load_labeled_scene(const std::string& scene_path,
                                     const std::string& labels_path) {
  pcseg::PointCloud cloud = pcseg::read_ply(scene_path);
  const std::string labels =
      labels_path.empty() ? sibling_labels_path(scene_path) : labels_path;
  pcseg::apply_labels(cloud, pcseg::read_labels(labels));
  return cloud;
}

int run_train(const pcseg::RunConfig& config, const std::vector<std::string>& scene_paths,
              const std::vector<std::string>& label_paths, const std::string& out_dir) {
  if (scene_paths.empty()) throw pcseg::IoError("train: no --scene inputs");
  if (!label_paths.empty() && label_paths.size() != scene_paths.size()) {
    throw pcseg::IoError("train: --labels count must match --scene count");
  }
  std::vector<pcseg::PointCloud> scenes;
  scenes.reserve(scene_paths.size());
  for (std::size_t i = 0; i < scene_paths.size(); ++i) {
    scenes.push_back(load_labeled_scene(scene_paths[i],
                                        label_paths.empty() ? std::string() : label_paths[i]));
  }
  fs::create_directories(out_dir);
  const pcseg::TrainResult trained =
      pcseg::train_on_scenes(scenes, config, [](int epoch, double loss) {
        if (epoch == 1 || epoch % 10 == 0) {
          std::cerr << "epoch " << epoch << " loss " << loss << "\n";
        }
      });
  pcseg::save_network((fs::path(out_dir) / "model.bin").string(), trained.params);
  std::string log;
  for (double loss : trained.epoch_loss) {
    char line[64];
    std::snprintf(line, sizeof(line), "%.17g\n", loss);
    log += line;
  }
  write_text_file((fs::path(out_dir) / "train_loss.txt").string(), log);
  maybe_dump_config(config, out_dir);
  std::cerr << "wrote " << (fs::path(out_dir) / "model.bin").string() << "\n";
  return 0;
}

void infer_one_scene(const pcseg::RunConfig& config, const pcseg::NetworkParams& params,
                     const std::string& scene_path, const std::string& out_dir,
                     std::mutex& log_mutex) {
  const pcseg::PointCloud cloud = pcseg::read_ply(scene_path);
  const std::vector<std::string> names = resolve_class_names(cloud, config);
  if (!cloud.class_names.empty() &&
      static_cast<int>(cloud.class_names.size()) != params.num_classes) {
    throw pcseg::IoError("model expects " + std::to_string(params.num_classes) +
                         " classes but the scene declares " +
                         std::to_string(cloud.class_names.size()));
  }
  const std::string stem = fs::path(scene_path).stem().string();
  pcseg::SceneTrace trace;
  std::ostringstream merge_log;
  const pcseg::SegmentationResult result =
      pcseg::segment_scene(cloud, params, config,
                           config.dump_intermediate ? &trace : nullptr, &merge_log);

  pcseg::write_labels((fs::path(out_dir) / (stem + ".labels")).string(), result.semantic,
                      result.instance);
  pcseg::write_instance_summary((fs::path(out_dir) / (stem + "_instances.txt")).string(),
                                result, names);
  if (config.dump_intermediate) {
    pcseg::export_predictions((fs::path(out_dir) / (stem + "_predictions.txt")).string(),
                              trace.predictions);
    pcseg::write_labels((fs::path(out_dir) / (stem + "_init.labels")).string(),
                        trace.network_semantic, trace.merged_instance);
    std::string energies;
    for (double e : trace.energy) {
      char line[64];
      std::snprintf(line, sizeof(line), "%.17g\n", e);
      energies += line;
    }
    write_text_file((fs::path(out_dir) / (stem + "_energy.txt")).string(), energies);
  }
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << merge_log.str();
  std::cerr << "scene " << stem << ": " << result.confidences.size() << " instances\n";
}

int run_infer(const pcseg::RunConfig& config, const std::vector<std::string>& scene_paths,
              const std::string& model_path, const std::string& out_dir) {
  if (scene_paths.empty()) throw pcseg::IoError("infer: no --scene inputs");
  const pcseg::NetworkParams params = pcseg::load_network(model_path);
  fs::create_directories(out_dir);
  maybe_dump_config(config, out_dir);

  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string first_error;
  auto work = [&]() {
    for (std::size_t i = next.fetch_add(1); i < scene_paths.size(); i = next.fetch_add(1)) {
      try {
        infer_one_scene(config, params, scene_paths[i], out_dir, log_mutex);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error.empty()) first_error = scene_paths[i] + ": " + e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(config.jobs,
                                             static_cast<int>(scene_paths.size())));
  if (jobs == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int t = 0; t < jobs; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (!first_error.empty()) throw pcseg::IoError(first_error);
  return 0;
}

int run_eval(const pcseg::RunConfig& config, const std::vector<std::string>& gt_paths,
             const std::vector<std::string>& pred_paths,
             const std::vector<std::string>& summary_paths, const std::string& out_dir) {
  if (gt_paths.empty()) throw pcseg::IoError("eval: no --gt inputs");
  if (gt_paths.size() != pred_paths.size()) {
    throw pcseg::IoError("eval: --gt and --pred counts differ");
  }
  if (!summary_paths.empty() && summary_paths.size() != pred_paths.size()) {
    throw pcseg::IoError("eval: --summary count must match --pred count");
  }
  std::vector<pcseg::EvalScene> scenes;
  scenes.reserve(gt_paths.size());
  int max_label = -1;
  for (std::size_t i = 0; i < gt_paths.size(); ++i) {
    pcseg::EvalScene scene;
    scene.gt = pcseg::read_labels(gt_paths[i]);
    scene.pred = pcseg::read_labels(pred_paths[i]);
    if (!summary_paths.empty()) {
      scene.confidences = pcseg::read_summary_confidences(summary_paths[i]);
    }
    for (int s : scene.gt.semantic) max_label = std::max(max_label, s);
    for (int s : scene.pred.semantic) max_label = std::max(max_label, s);
    scenes.push_back(std::move(scene));
  }
  const int num_classes =
      std::max(static_cast<int>(config.synth.class_names.size()), max_label + 1);
  const pcseg::EvalReport report = pcseg::evaluate_scenes(scenes, num_classes, 0.5);

  const std::string text = pcseg::format_eval_report(report, config.synth.class_names);
  std::cout << text;
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / "eval_report.txt").string(), text);
  write_text_file((fs::path(out_dir) / "eval_report.json").string(),
                  pcseg::eval_report_json(report, config.synth.class_names));
  maybe_dump_config(config, out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint semantic and instance segmentation of 3D point clouds"};
  app.require_subcommand(1);

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic labeled dataset");
  CommonFlags synth_flags;
  synth_flags.attach(synth);
  std::string synth_out = "dataset";
  synth->add_option("--output", synth_out, "Dataset directory");
  int synth_scenes = 0;
  CLI::Option* opt_synth_scenes =
      synth->add_option("--num-scenes", synth_scenes, "Scene count (overrides the config)");

  CLI::App* train = app.add_subcommand("train", "Train the network on labeled scenes");
  CommonFlags train_flags;
  train_flags.attach(train);
  std::vector<std::string> train_scenes, train_labels;
  std::string train_out = "run";
  train->add_option("--scene", train_scenes, "Training scene PLY (repeatable)");
  train->add_option("--labels", train_labels,
                    "Label file per scene (defaults to <scene>.labels)");
  train->add_option("--output", train_out, "Output directory for model and loss log");

  CLI::App* infer = app.add_subcommand("infer", "Segment scenes with a trained model");
  CommonFlags infer_flags;
  infer_flags.attach(infer);
  std::vector<std::string> infer_scenes;
  std::string infer_model, infer_out = "run";
  infer->add_option("--scene", infer_scenes, "Scene PLY to segment (repeatable)");
  infer->add_option("--model", infer_model, "Trained model file")->required();
  infer->add_option("--output", infer_out, "Output directory for results");

  CLI::App* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  CommonFlags eval_flags;
  eval_flags.attach(eval);
  std::vector<std::string> eval_gt, eval_pred, eval_summaries;
  std::string eval_out = ".";
  eval->add_option("--gt", eval_gt, "Ground-truth label file (repeatable)");
  eval->add_option("--pred", eval_pred, "Predicted label file (repeatable)");
  eval->add_option("--summary", eval_summaries,
                   "Instance summary per prediction, source of confidences");
  eval->add_option("--output", eval_out, "Directory for the evaluation report");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      pcseg::RunConfig config = synth_flags.resolve();
      if (opt_synth_scenes->count() > 0) {
        config.num_scenes = synth_scenes;
        config.validate();
      }
      return run_synth(config, synth_out);
    }
    if (train->parsed()) {
      return run_train(train_flags.resolve(), train_scenes, train_labels, train_out);
    }
    if (infer->parsed()) {
      return run_infer(infer_flags.resolve(), infer_scenes, infer_model, infer_out);
    }
    if (eval->parsed()) {
      return run_eval(eval_flags.resolve(), eval_gt, eval_pred, eval_summaries, eval_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
