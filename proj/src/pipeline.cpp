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

#include "pcseg/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "pcseg/io_error.hpp"
#include "pcseg/merge.hpp"
#include "pcseg/rng.hpp"

namespace pcseg {

namespace {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return Rng(base).fork(tag).next_u64();
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    m.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace

namespace {

PredictionField average_fields(std::size_t point_count, const std::vector<Window>& windows,
                               const std::vector<PredictionField>& fields) {
  const int n = static_cast<int>(point_count);
  PredictionField scene;
  scene.probs = Eigen::MatrixXd::Zero(n, fields.empty() ? 0 : fields.front().probs.cols());
  scene.embeddings =
      Eigen::MatrixXd::Zero(n, fields.empty() ? 0 : fields.front().embeddings.cols());
  std::vector<long> hits(point_count, 0);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const Window& window = windows[w];
    const PredictionField& field = fields[w];
    for (std::size_t r = 0; r < window.vertex_indices.size(); ++r) {
      const int idx = window.vertex_indices[r];
      scene.probs.row(idx) += field.probs.row(static_cast<Eigen::Index>(r));
      scene.embeddings.row(idx) += field.embeddings.row(static_cast<Eigen::Index>(r));
      ++hits[static_cast<std::size_t>(idx)];
    }
  }
  for (int j = 0; j < n; ++j) {
    if (hits[static_cast<std::size_t>(j)] == 0) {
      throw std::logic_error("scene_predictions: point " + std::to_string(j) +
                             " not covered by any window");
    }
    const double inv = 1.0 / static_cast<double>(hits[static_cast<std::size_t>(j)]);
    scene.probs.row(j) *= inv;
    scene.embeddings.row(j) *= inv;
    scene.probs.row(j) /= scene.probs.row(j).sum();
  }
  scene.validate();
  return scene;
}

}  // namespace

PredictionField scene_predictions(const PointCloud& cloud, const std::vector<Window>& windows,
                                  const NetworkParams& params) {
  std::vector<PredictionField> fields;
  fields.reserve(windows.size());
  for (const Window& window : windows) {
    fields.push_back(forward(params, window_features(cloud, window)));
  }
  return average_fields(cloud.size(), windows, fields);
}

SegmentationResult segment_scene(const PointCloud& cloud, const NetworkParams& params,
                                 const RunConfig& config, SceneTrace* trace, std::ostream* log) {
  if (cloud.empty()) throw std::invalid_argument("segment_scene: empty cloud");
  const std::vector<Window> windows = scan_windows(cloud, config.windows, config.seed);

  std::vector<PredictionField> fields;
  std::vector<std::vector<int>> window_instances;
  fields.reserve(windows.size());
  window_instances.reserve(windows.size());
  for (const Window& window : windows) {
    fields.push_back(forward(params, window_features(cloud, window)));
    window_instances.push_back(mean_shift(fields.back().embeddings, config.meanshift).labels);
  }
  const PredictionField scene = average_fields(cloud.size(), windows, fields);

  const std::vector<int> merged = block_merge(cloud, windows, window_instances, config.merge, log);

  if (trace != nullptr) {
    trace->predictions = scene;
    trace->network_semantic = argmax_rows(scene.probs);
    trace->merged_instance = merged;
    trace->energy.clear();
    trace->energy.push_back(
        energy(cloud, scene, JointLabeling{argmax_rows(scene.probs), merged}, config.crf));
  }

  IterationObserver observer = nullptr;
  if (trace != nullptr) {
    observer = [&](int, const LabelState& state, double) {
      const ArgmaxCache cache = build_argmax_cache(state);
      trace->energy.push_back(
          energy(cloud, scene, JointLabeling{cache.semantic, cache.instance}, config.crf));
    };
  }
  const InferResult inferred = infer(cloud, scene, merged, config.crf, observer);

  const LabelState& state = inferred.state;
  const int live = state.num_instances();
  std::vector<InstanceProposal> proposals(static_cast<std::size_t>(live));
  for (int i = 0; i < live; ++i) {
    Eigen::Index cls = 0;
    state.instances[static_cast<std::size_t>(i)].histogram.maxCoeff(&cls);
    proposals[static_cast<std::size_t>(i)].semantic = static_cast<int>(cls);
    proposals[static_cast<std::size_t>(i)].confidence =
        instance_confidence(state, i, config.crf.prob_floor);
  }
  for (std::size_t j = 0; j < inferred.labeling.instance.size(); ++j) {
    proposals[static_cast<std::size_t>(inferred.labeling.instance[j])].points.push_back(
        static_cast<int>(j));
  }

  const NmsResult kept = nms(proposals, config.nms_iou);
  std::vector<int> rank(proposals.size(), -1);
  for (std::size_t r = 0; r < kept.kept.size(); ++r) {
    rank[static_cast<std::size_t>(kept.kept[r])] = static_cast<int>(r);
  }

  SegmentationResult result;
  result.semantic = inferred.labeling.semantic;
  result.instance.resize(cloud.size());
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    int p = inferred.labeling.instance[j];
    if (kept.absorbed_into[static_cast<std::size_t>(p)] >= 0) {
      p = kept.absorbed_into[static_cast<std::size_t>(p)];
    }
    result.instance[j] = rank[static_cast<std::size_t>(p)];
  }
  result.confidences.resize(kept.kept.size());
  result.instance_semantic.resize(kept.kept.size());
  for (std::size_t r = 0; r < kept.kept.size(); ++r) {
    result.confidences[r] = proposals[static_cast<std::size_t>(kept.kept[r])].confidence;
    result.instance_semantic[r] = proposals[static_cast<std::size_t>(kept.kept[r])].semantic;
  }
  return result;
}

std::vector<TrainSample> make_training_samples(const std::vector<PointCloud>& scenes,
                                               const RunConfig& config) {
  std::vector<TrainSample> samples;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const PointCloud& cloud = scenes[s];
    if (!cloud.has_ground_truth()) {
      throw std::invalid_argument("training scene " + std::to_string(s) +
                                  " has no ground-truth labels");
    }
    const std::uint64_t seed = derive_seed(config.seed, 0x717a0000ULL + s);
    for (const Window& window : scan_windows(cloud, config.windows, seed)) {
      TrainSample sample;
      sample.inputs = window_features(cloud, window);
      sample.semantic.reserve(window.vertex_indices.size());
      sample.instance.reserve(window.vertex_indices.size());
      for (int idx : window.vertex_indices) {
        sample.semantic.push_back(*cloud.points[static_cast<std::size_t>(idx)].gt_semantic);
        sample.instance.push_back(*cloud.points[static_cast<std::size_t>(idx)].gt_instance);
      }
      samples.push_back(std::move(sample));
    }
  }
  return samples;
}

TrainResult train_on_scenes(const std::vector<PointCloud>& scenes, const RunConfig& config,
                            const std::function<void(int, double)>& progress) {
  if (scenes.empty()) throw std::invalid_argument("train_on_scenes: no scenes");
  const int num_classes = static_cast<int>(scenes.front().class_names.size());
  for (const PointCloud& cloud : scenes) {
    if (static_cast<int>(cloud.class_names.size()) != num_classes) {
      throw std::invalid_argument("train_on_scenes: scenes disagree on the class table");
    }
  }
  const std::vector<TrainSample> samples = make_training_samples(scenes, config);

  Rng init_rng(derive_seed(config.seed, 0x1417ULL));
  NetworkParams params =
      NetworkParams::init(9, num_classes, config.network.embedding_dim,
                          config.network.trunk_widths, config.network.head_width, init_rng);
  TrainConfig train_config = config.train;
  train_config.seed = derive_seed(config.seed, 0x57e9ULL);
  return train_network(samples, std::move(params), train_config, config.loss, progress);
}

DatasetPaths write_dataset(const std::string& out_dir, const RunConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "train");
  fs::create_directories(fs::path(out_dir) / "test");
  const int n_train = static_cast<int>(
      std::min<long>(config.num_scenes,
                     std::llround(config.train_fraction * config.num_scenes)));
  DatasetPaths paths;
  for (int i = 0; i < config.num_scenes; ++i) {
    const PointCloud cloud = generate_scene(derive_seed(config.seed, 0x5ce4e0000ULL + i),
                                            config.synth);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "scene_%03d", i);
    const fs::path dir = fs::path(out_dir) / (i < n_train ? "train" : "test");
    const fs::path ply = dir / (std::string(stem) + ".ply");
    write_ply(ply.string(), cloud, /*binary=*/true);
    write_labels((dir / (std::string(stem) + ".labels")).string(), cloud.semantic_labels(),
                 cloud.instance_labels());
    (i < n_train ? paths.train_scenes : paths.test_scenes).push_back(ply.string());
  }
  return paths;
}

void write_instance_summary(const std::string& path, const SegmentationResult& result,
                            const std::vector<std::string>& class_names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  std::vector<long> sizes(result.confidences.size(), 0);
  for (int id : result.instance) ++sizes[static_cast<std::size_t>(id)];
  for (std::size_t i = 0; i < result.confidences.size(); ++i) {
    const int cls = result.instance_semantic[i];
    const std::string name = (cls >= 0 && static_cast<std::size_t>(cls) < class_names.size())
                                 ? class_names[static_cast<std::size_t>(cls)]
                                 : "class" + std::to_string(cls);
    char value[64];
    std::snprintf(value, sizeof(value), "%.17g", result.confidences[i]);
    out << i << ' ' << name << ' ' << sizes[i] << ' ' << value << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

std::map<int, double> read_summary_confidences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::map<int, double> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    int id = 0;
    std::string name;
    long size = 0;
    double confidence = 0.0;
    if (!(row >> id >> name >> size >> confidence)) {
      throw IoError(path + ": malformed summary line " + std::to_string(line_no));
    }
    out[id] = confidence;
  }
  return out;
}

std::vector<EvalInstance> labels_to_instances(const std::vector<int>& semantic,
                                              const std::vector<int>& instance, int index_offset,
                                              const std::map<int, double>& confidences) {
  if (semantic.size() != instance.size()) {
    throw std::invalid_argument("labels_to_instances: label vectors differ in length");
  }
  std::map<int, std::vector<int>> members;
  for (std::size_t j = 0; j < instance.size(); ++j) {
    members[instance[j]].push_back(static_cast<int>(j));
  }
  std::vector<EvalInstance> out;
  out.reserve(members.size());
  for (const auto& [id, points] : members) {
    EvalInstance inst;
    std::map<int, int> votes;
    for (int j : points) ++votes[semantic[static_cast<std::size_t>(j)]];
    int best_count = -1;
    for (const auto& [cls, count] : votes) {
      if (count > best_count) {
        best_count = count;
        inst.semantic = cls;
      }
    }
    if (auto it = confidences.find(id); it != confidences.end()) inst.confidence = it->second;
    inst.points.reserve(points.size());
    for (int j : points) inst.points.push_back(j + index_offset);
    out.push_back(std::move(inst));
  }
  return out;
}

EvalReport evaluate_scenes(const std::vector<EvalScene>& scenes, int num_classes,
                           double iou_threshold) {
  std::vector<int> gt_all;
  std::vector<int> pred_all;
  std::vector<EvalInstance> detections;
  std::vector<EvalInstance> ground_truth;
  int offset = 0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const EvalScene& scene = scenes[s];
    if (scene.gt.semantic.size() != scene.pred.semantic.size()) {
      throw std::invalid_argument("scene " + std::to_string(s) +
                                  ": prediction and ground truth differ in length");
    }
    gt_all.insert(gt_all.end(), scene.gt.semantic.begin(), scene.gt.semantic.end());
    pred_all.insert(pred_all.end(), scene.pred.semantic.begin(), scene.pred.semantic.end());
    for (auto& inst : labels_to_instances(scene.pred.semantic, scene.pred.instance, offset,
                                          scene.confidences)) {
      detections.push_back(std::move(inst));
    }
    for (auto& inst : labels_to_instances(scene.gt.semantic, scene.gt.instance, offset)) {
      ground_truth.push_back(std::move(inst));
    }
    offset += static_cast<int>(scene.gt.semantic.size());
  }
  EvalReport report;
  report.semantic = semantic_metrics(pred_all, gt_all, num_classes);
  report.instances = instance_ap(detections, ground_truth, iou_threshold);
  return report;
}

}  // namespace pcseg
