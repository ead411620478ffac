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

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "pcseg/io_error.hpp"
#include "pcseg/pipeline.hpp"
#include "pcseg/synth.hpp"

using namespace pcseg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pcseg_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig small_run_config() {
  RunConfig config;
  config.synth.scene_extent = 1.5;
  config.synth.density = 80.0;
  config.synth.min_objects = 2;
  config.synth.max_objects = 3;
  config.windows.window = 1.0;
  config.windows.stride = 0.5;
  config.windows.point_count = 128;
  config.network.embedding_dim = 3;
  config.network.trunk_widths = {8, 16};
  config.network.head_width = 8;
  config.train.epochs = 2;
  config.train.batch_size = 4;
  config.crf.mf_iters = 2;
  return config;
}

NetworkParams random_net(const RunConfig& config, int num_classes, std::uint64_t seed) {
  Rng rng(seed);
  return NetworkParams::init(9, num_classes, config.network.embedding_dim,
                             config.network.trunk_widths, config.network.head_width, rng);
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("scene predictions average overlapping windows") {
  PointCloud cloud;
  cloud.class_names = {"a", "b"};
  for (int i = 0; i < 4; ++i) {
    Vertex v;
    v.location = Eigen::Vector3d(0.3 * i, 0.1, 0.2);
    v.color = Eigen::Vector3d(0.2, 0.4, 0.6);
    cloud.points.push_back(v);
  }
  Window w1;
  w1.origin = Eigen::Vector3d(0.0, 0.0, 0.0);
  w1.size = Eigen::Vector3d(1.0, 1.0, 1.0);
  w1.vertex_indices = {0, 1, 2};
  Window w2 = w1;
  w2.origin = Eigen::Vector3d(0.3, 0.0, 0.0);  // shifts the relative positions
  w2.vertex_indices = {1, 2, 3};

  const RunConfig config = small_run_config();
  const NetworkParams params = random_net(config, 2, 11);
  const PredictionField scene = scene_predictions(cloud, {w1, w2}, params);

  const PredictionField f1 = forward(params, window_features(cloud, w1));
  const PredictionField f2 = forward(params, window_features(cloud, w2));

  REQUIRE(scene.probs.rows() == 4);
  for (int j = 0; j < 4; ++j) {
    CHECK(scene.probs.row(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Point 0 is seen once, point 1 twice.
  CHECK((scene.probs.row(0) - f1.probs.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::RowVectorXd mixed = 0.5 * (f1.probs.row(1) + f2.probs.row(0));
  CHECK((scene.probs.row(1) - mixed / mixed.sum()).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::RowVectorXd blend = 0.5 * (f1.embeddings.row(1) + f2.embeddings.row(0));
  CHECK((scene.embeddings.row(1) - blend).cwiseAbs().maxCoeff() < 1e-12);

  // A point no window covers is a hard error.
  Vertex stray;
  stray.location = Eigen::Vector3d(5.0, 5.0, 5.0);
  cloud.points.push_back(stray);
  CHECK_THROWS_WITH(scene_predictions(cloud, {w1, w2}, params), doctest::Contains("point 4"));
}

TEST_CASE("training samples carry the ground truth of their windows") {
  RunConfig config = small_run_config();
  const PointCloud scene = generate_scene(3, config.synth);
  const int num_classes = static_cast<int>(scene.class_names.size());

  const std::vector<TrainSample> samples = make_training_samples({scene}, config);
  REQUIRE(!samples.empty());
  for (const TrainSample& sample : samples) {
    CHECK(sample.inputs.rows() == config.windows.point_count);
    CHECK(sample.inputs.cols() == 9);
    REQUIRE(sample.semantic.size() == static_cast<std::size_t>(config.windows.point_count));
    REQUIRE(sample.instance.size() == sample.semantic.size());
    for (int s : sample.semantic) CHECK((s >= 0 && s < num_classes));
    for (int i : sample.instance) CHECK(i >= 0);
  }

  const std::vector<TrainSample> again = make_training_samples({scene}, config);
  REQUIRE(again.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK((again[i].inputs - samples[i].inputs).cwiseAbs().maxCoeff() == 0.0);
    CHECK(again[i].semantic == samples[i].semantic);
  }

  PointCloud unlabeled = scene;
  for (Vertex& v : unlabeled.points) {
    v.gt_semantic.reset();
    v.gt_instance.reset();
  }
  CHECK_THROWS_WITH(make_training_samples({unlabeled}, config),
                    doctest::Contains("no ground-truth"));
}

TEST_CASE("scene training is deterministic and checks the class table") {
  RunConfig config = small_run_config();
  const PointCloud scene = generate_scene(5, config.synth);
  const TrainResult a = train_on_scenes({scene}, config);
  const TrainResult b = train_on_scenes({scene}, config);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(a.params.num_classes == static_cast<int>(scene.class_names.size()));
  REQUIRE(a.epoch_loss.size() == 2);

  PointCloud other = scene;
  other.class_names.push_back("extra");
  CHECK_THROWS_WITH(train_on_scenes({scene, other}, config),
                    doctest::Contains("class table"));
}

TEST_CASE("datasets split deterministically") {
  RunConfig config = small_run_config();
  config.num_scenes = 5;
  config.train_fraction = 0.6;

  const fs::path dir_a = temp_dir("data_a");
  const DatasetPaths paths = write_dataset(dir_a.string(), config);
  REQUIRE(paths.train_scenes.size() == 3);
  REQUIRE(paths.test_scenes.size() == 2);
  for (const std::string& ply : paths.train_scenes) {
    CHECK(fs::exists(ply));
    CHECK(fs::exists(fs::path(ply).replace_extension(".labels")));
  }
  const PointCloud scene = read_ply(paths.train_scenes.front());
  CHECK(scene.class_names == config.synth.class_names);
  CHECK(scene.size() > 0);

  const fs::path dir_b = temp_dir("data_b");
  const DatasetPaths again = write_dataset(dir_b.string(), config);
  CHECK(file_bytes(paths.train_scenes.front()) == file_bytes(again.train_scenes.front()));
  CHECK(file_bytes(fs::path(paths.test_scenes.back())) ==
        file_bytes(fs::path(again.test_scenes.back())));
}

TEST_CASE("instance summaries round trip") {
  SegmentationResult result;
  result.semantic = {1, 1, 0};
  result.instance = {0, 0, 1};
  result.confidences = {-0.5, -1.25};
  result.instance_semantic = {1, 0};
  const fs::path path = temp_dir("summary") / "instances.txt";
  write_instance_summary(path.string(), result, {"floor", "crate"});

  const std::string text = file_bytes(path);
  CHECK(text == "0 crate 2 -0.5\n1 floor 1 -1.25\n");

  const std::map<int, double> confidences = read_summary_confidences(path.string());
  REQUIRE(confidences.size() == 2);
  CHECK(confidences.at(0) == doctest::Approx(-0.5));
  CHECK(confidences.at(1) == doctest::Approx(-1.25));

  {
    std::ofstream out(path);
    out << "0 crate 2 -0.5\n1 floor oops\n";
  }
  CHECK_THROWS_WITH_AS(read_summary_confidences(path.string()), doctest::Contains("line 2"),
                       IoError);
}

TEST_CASE("label vectors group into instance sets") {
  const std::vector<int> semantic = {0, 0, 1, 1, 1};
  const std::vector<int> instance = {7, 7, 7, 2, 2};
  const std::vector<EvalInstance> sets =
      labels_to_instances(semantic, instance, 10, {{7, -0.5}});
  REQUIRE(sets.size() == 2);
  // Ids come out in ascending order.
  CHECK(sets[0].points == std::vector<int>{13, 14});
  CHECK(sets[0].semantic == 1);
  CHECK(sets[0].confidence == 0.0);
  CHECK(sets[1].points == std::vector<int>{10, 11, 12});
  CHECK(sets[1].semantic == 0);  // two votes against one
  CHECK(sets[1].confidence == doctest::Approx(-0.5));
  CHECK_THROWS(labels_to_instances({0}, {0, 1}, 0));
}

TEST_CASE("pooled evaluation offsets instances per scene") {
  EvalScene a;
  a.gt.semantic = {0, 0};
  a.gt.instance = {0, 0};
  a.pred = a.gt;
  EvalScene b;
  b.gt.semantic = {1, 1};
  b.gt.instance = {0, 0};
  b.pred = b.gt;
  const EvalReport report = evaluate_scenes({a, b}, 2);
  CHECK(report.semantic.micro_mean == doctest::Approx(1.0));
  CHECK(report.instances.per_class_ap.at(0) == doctest::Approx(1.0));
  CHECK(report.instances.per_class_ap.at(1) == doctest::Approx(1.0));
  CHECK(report.instances.mean_ap == doctest::Approx(1.0));

  EvalScene bad = a;
  bad.pred.semantic = {0};
  bad.pred.instance = {0};
  CHECK_THROWS_WITH(evaluate_scenes({bad}, 2), doctest::Contains("scene 0"));
}

TEST_CASE("segmenting a scene yields ranked dense instances") {
  RunConfig config = small_run_config();
  const PointCloud scene = generate_scene(8, config.synth);
  const NetworkParams params =
      random_net(config, static_cast<int>(scene.class_names.size()), 21);

  SceneTrace trace;
  const SegmentationResult result = segment_scene(scene, params, config, &trace);

  const std::size_t n = scene.size();
  REQUIRE(result.semantic.size() == n);
  REQUIRE(result.instance.size() == n);
  REQUIRE(result.confidences.size() == result.instance_semantic.size());
  REQUIRE(!result.confidences.empty());

  const int live = static_cast<int>(result.confidences.size());
  std::set<int> used;
  for (int id : result.instance) {
    CHECK(id >= 0);
    CHECK(id < live);
    used.insert(id);
  }
  CHECK(static_cast<int>(used.size()) == live);
  for (int i = 1; i < live; ++i) CHECK(result.confidences[i] <= result.confidences[i - 1]);
  for (double c : result.confidences) CHECK(c <= 0.0);
  for (int cls : result.instance_semantic) {
    CHECK((cls >= 0 && cls < static_cast<int>(scene.class_names.size())));
  }
  for (int s : result.semantic) {
    CHECK((s >= 0 && s < static_cast<int>(scene.class_names.size())));
  }

  REQUIRE(trace.network_semantic.size() == n);
  REQUIRE(trace.merged_instance.size() == n);
  CHECK(trace.predictions.probs.rows() == static_cast<Eigen::Index>(n));
  CHECK(!trace.energy.empty());
}

TEST_CASE("unary segmentation keeps the network classes") {
  RunConfig config = small_run_config();
  config.crf.mode = CrfMode::Unary;
  const PointCloud scene = generate_scene(9, config.synth);
  const NetworkParams params =
      random_net(config, static_cast<int>(scene.class_names.size()), 22);
  SceneTrace trace;
  const SegmentationResult result = segment_scene(scene, params, config, &trace);
  CHECK(result.semantic == trace.network_semantic);
}
