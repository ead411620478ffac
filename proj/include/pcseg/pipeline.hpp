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

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pcseg/config.hpp"
#include "pcseg/metrics.hpp"
#include "pcseg/ply_io.hpp"

namespace pcseg {

/// Final per-scene output: a semantic class and an instance id per point,
/// plus confidence and majority class per surviving instance. Instance ids
/// are dense and ordered by descending confidence.
struct SegmentationResult {
  std::vector<int> semantic;
  std::vector<int> instance;
  std::vector<double> confidences;
  std::vector<int> instance_semantic;
};

/// Intermediate artifacts captured on request.
struct SceneTrace {
  PredictionField predictions;       // scene-averaged network outputs
  std::vector<int> network_semantic; // arg-max class before any inference
  std::vector<int> merged_instance;  // block-merged clustering, before inference
  std::vector<double> energy;        // initial state, then one value per iteration
};

/// Runs the network over every window and averages the per-point outputs
/// back onto the scene (probabilities renormalized after averaging).
PredictionField scene_predictions(const PointCloud& cloud, const std::vector<Window>& windows,
                                  const NetworkParams& params);

/// windows -> network -> per-window mode clustering -> block merge ->
/// scene-level relaxation -> suppression. Points of suppressed instances
/// join their keeper.
SegmentationResult segment_scene(const PointCloud& cloud, const NetworkParams& params,
                                 const RunConfig& config, SceneTrace* trace = nullptr,
                                 std::ostream* log = nullptr);

/// One training sample per window of every scene.
std::vector<TrainSample> make_training_samples(const std::vector<PointCloud>& scenes,
                                               const RunConfig& config);

TrainResult train_on_scenes(const std::vector<PointCloud>& scenes, const RunConfig& config,
                            const std::function<void(int, double)>& progress = nullptr);

struct DatasetPaths {
  std::vector<std::string> train_scenes;  // PLY paths; labels sit next to them
  std::vector<std::string> test_scenes;
};

/// Generates `num_scenes` synthetic scenes under `out_dir`, split into
/// train/ and test/ subdirectories. Deterministic per seed.
DatasetPaths write_dataset(const std::string& out_dir, const RunConfig& config);

/// One line per instance: `<instance_id> <class_name> <size> <confidence>`.
void write_instance_summary(const std::string& path, const SegmentationResult& result,
                            const std::vector<std::string>& class_names);

/// Confidence by instance id from a summary file.
std::map<int, double> read_summary_confidences(const std::string& path);

/// Groups labeled points into per-instance index sets. Instance semantics
/// are majority votes; `index_offset` shifts point indices so several
/// scenes can pool into one evaluation. Confidences default to 0.
std::vector<EvalInstance> labels_to_instances(const std::vector<int>& semantic,
                                              const std::vector<int>& instance, int index_offset,
                                              const std::map<int, double>& confidences = {});

struct EvalScene {
  LabelFile gt;
  LabelFile pred;
  std::map<int, double> confidences;  // by predicted instance id
};

/// Pools every scene into one report: concatenated semantic labels,
/// instance sets offset per scene.
EvalReport evaluate_scenes(const std::vector<EvalScene>& scenes, int num_classes,
                           double iou_threshold = 0.5);

}  // namespace pcseg
