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

// Python module exposing the main operations: scene synthesis, PLY round
// trips, the pointwise network, the clustering loss, mode clustering, the
// relaxation over joint labelings, full-scene segmentation, and metrics.
// Point data crosses the boundary as plain numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "pcseg/config.hpp"
#include "pcseg/crf.hpp"
#include "pcseg/embedding_loss.hpp"
#include "pcseg/meanshift.hpp"
#include "pcseg/metrics.hpp"
#include "pcseg/net.hpp"
#include "pcseg/pipeline.hpp"
#include "pcseg/ply_io.hpp"
#include "pcseg/rng.hpp"
#include "pcseg/synth.hpp"

namespace py = pybind11;
using namespace pcseg;

namespace {

RunConfig config_from_json(const std::string& text) {
  RunConfig config;
  if (!text.empty()) apply_config_json(config, text, "<config_json>");
  config.validate();
  return config;
}

void require_columns(const Eigen::MatrixXd& m, Eigen::Index cols, const char* name) {
  if (m.cols() != cols) {
    throw std::invalid_argument(std::string(name) + " must have " + std::to_string(cols) +
                                " columns");
  }
}

PointCloud cloud_from_arrays(const Eigen::MatrixXd& locations, const Eigen::MatrixXd& colors,
                             const std::optional<Eigen::MatrixXd>& normals,
                             const std::optional<std::vector<int>>& semantic,
                             const std::optional<std::vector<int>>& instance,
                             const std::vector<std::string>& class_names) {
  require_columns(locations, 3, "locations");
  require_columns(colors, 3, "colors");
  if (colors.rows() != locations.rows()) {
    throw std::invalid_argument("colors and locations row counts differ");
  }
  if (normals) {
    require_columns(*normals, 3, "normals");
    if (normals->rows() != locations.rows()) {
      throw std::invalid_argument("normals and locations row counts differ");
    }
  }
  const auto n = static_cast<std::size_t>(locations.rows());
  if (semantic.has_value() != instance.has_value()) {
    throw std::invalid_argument("semantic and instance labels must come together");
  }
  if (semantic && (semantic->size() != n || instance->size() != n)) {
    throw std::invalid_argument("label length does not match the point count");
  }
  PointCloud cloud;
  cloud.class_names = class_names;
  cloud.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vertex& v = cloud.points[i];
    const auto r = static_cast<Eigen::Index>(i);
    v.location = locations.row(r).transpose();
    v.color = colors.row(r).transpose();
    if (normals) v.normal = normals->row(r).transpose();
    if (semantic) {
      v.gt_semantic = (*semantic)[i];
      v.gt_instance = (*instance)[i];
    }
  }
  cloud.validate();
  return cloud;
}

PointCloud cloud_from_dict(const py::dict& scene) {
  const auto locations = scene["locations"].cast<Eigen::MatrixXd>();
  const auto colors = scene["colors"].cast<Eigen::MatrixXd>();
  std::optional<Eigen::MatrixXd> normals;
  if (scene.contains("normals") && !scene["normals"].is_none()) {
    normals = scene["normals"].cast<Eigen::MatrixXd>();
  }
  std::optional<std::vector<int>> semantic;
  std::optional<std::vector<int>> instance;
  if (scene.contains("semantic")) semantic = scene["semantic"].cast<std::vector<int>>();
  if (scene.contains("instance")) instance = scene["instance"].cast<std::vector<int>>();
  std::vector<std::string> class_names;
  if (scene.contains("class_names")) {
    class_names = scene["class_names"].cast<std::vector<std::string>>();
  }
  return cloud_from_arrays(locations, colors, normals, semantic, instance, class_names);
}

py::dict cloud_to_dict(const PointCloud& cloud) {
  const auto n = static_cast<Eigen::Index>(cloud.size());
  Eigen::MatrixXd locations(n, 3);
  Eigen::MatrixXd colors(n, 3);
  Eigen::MatrixXd normals(cloud.has_normals() ? n : 0, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vertex& v = cloud.points[static_cast<std::size_t>(i)];
    locations.row(i) = v.location.transpose();
    colors.row(i) = v.color.transpose();
    if (cloud.has_normals()) normals.row(i) = v.normal->transpose();
  }
  py::dict out;
  out["locations"] = locations;
  out["colors"] = colors;
  if (cloud.has_normals()) out["normals"] = normals;
  if (cloud.has_ground_truth()) {
    out["semantic"] = cloud.semantic_labels();
    out["instance"] = cloud.instance_labels();
  }
  out["class_names"] = cloud.class_names;
  return out;
}

PredictionField field_from_arrays(const Eigen::MatrixXd& probs,
                                  const Eigen::MatrixXd& embeddings) {
  PredictionField field;
  field.probs = probs;
  field.embeddings = embeddings;
  field.validate();
  return field;
}

using PyInstance = std::tuple<int, double, std::vector<int>>;

std::vector<EvalInstance> eval_instances(const std::vector<PyInstance>& raw) {
  std::vector<EvalInstance> out;
  out.reserve(raw.size());
  for (const PyInstance& item : raw) {
    EvalInstance inst;
    inst.semantic = std::get<0>(item);
    inst.confidence = std::get<1>(item);
    inst.points = std::get<2>(item);
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_pcseg, m) {
  m.doc() = "Joint semantic and instance segmentation of 3D point clouds";

  py::class_<NetworkParams>(m, "Network",
                            "Pointwise multi-task network: per-point class probabilities "
                            "plus instance embeddings")
      .def_static(
          "init",
          [](int input_dim, int num_classes, int embedding_dim,
             const std::vector<int>& trunk_widths, int head_width, std::uint64_t seed) {
            Rng rng(seed);
            return NetworkParams::init(input_dim, num_classes, embedding_dim, trunk_widths,
                                       head_width, rng);
          },
          py::arg("input_dim"), py::arg("num_classes"), py::arg("embedding_dim"),
          py::arg("trunk_widths"), py::arg("head_width"), py::arg("seed") = 1)
      .def_static("load", &load_network, py::arg("path"))
      .def(
          "save", [](const NetworkParams& params, const std::string& path) {
            save_network(path, params);
          },
          py::arg("path"))
      .def(
          "forward",
          [](const NetworkParams& params, const Eigen::MatrixXd& inputs) {
            const PredictionField field = forward(params, inputs);
            return py::make_tuple(field.probs, field.embeddings);
          },
          py::arg("inputs"), "Returns (probs, embeddings) for one window of points")
      .def_readonly("input_dim", &NetworkParams::input_dim)
      .def_readonly("num_classes", &NetworkParams::num_classes)
      .def_readonly("embedding_dim", &NetworkParams::embedding_dim)
      .def_property_readonly("parameter_count", &NetworkParams::parameter_count);

  m.def(
      "generate_scene",
      [](std::uint64_t seed, const std::string& config_json) {
        return cloud_to_dict(generate_scene(seed, config_from_json(config_json).synth));
      },
      py::arg("seed"), py::arg("config_json") = std::string(),
      "Synthesizes one labeled scene; `config_json` uses the run-config schema");

  m.def(
      "read_ply", [](const std::string& path) { return cloud_to_dict(read_ply(path)); },
      py::arg("path"));
  m.def(
      "write_ply",
      [](const std::string& path, const Eigen::MatrixXd& locations,
         const Eigen::MatrixXd& colors, const std::optional<Eigen::MatrixXd>& normals,
         const std::optional<std::vector<int>>& semantic,
         const std::optional<std::vector<int>>& instance,
         const std::vector<std::string>& class_names, bool binary) {
        write_ply(path,
                  cloud_from_arrays(locations, colors, normals, semantic, instance, class_names),
                  binary);
      },
      py::arg("path"), py::arg("locations"), py::arg("colors"),
      py::arg("normals") = std::nullopt, py::arg("semantic") = std::nullopt,
      py::arg("instance") = std::nullopt,
      py::arg("class_names") = std::vector<std::string>(), py::arg("binary") = true);

  m.def(
      "embedding_loss",
      [](const Eigen::MatrixXd& embeddings, const std::vector<int>& instance_ids, double alpha,
         double beta, double gamma, double delta_pull, double delta_push) {
        EmbeddingLossConfig config;
        config.alpha = alpha;
        config.beta = beta;
        config.gamma = gamma;
        config.delta_pull = delta_pull;
        config.delta_push = delta_push;
        return embedding_loss(embeddings,
                              InstancePartition::from_assignment(embeddings, instance_ids),
                              config);
      },
      py::arg("embeddings"), py::arg("instance_ids"), py::arg("alpha") = 1.0,
      py::arg("beta") = 1.0, py::arg("gamma") = 0.001, py::arg("delta_pull") = 0.5,
      py::arg("delta_push") = 1.5,
      "Clustering loss over instance embeddings (pull + push + regularizer)");

  m.def(
      "mean_shift",
      [](const Eigen::MatrixXd& points, double bandwidth, double tolerance, int max_iterations) {
        MeanShiftConfig config;
        config.bandwidth = bandwidth;
        config.tolerance = tolerance;
        config.max_iterations = max_iterations;
        const MeanShiftResult result = mean_shift(points, config);
        return py::make_tuple(result.labels, result.modes, result.sizes);
      },
      py::arg("points"), py::arg("bandwidth") = 1.5, py::arg("tolerance") = 1e-4,
      py::arg("max_iterations") = 300, "Flat-kernel mode clustering; returns (labels, modes, sizes)");

  m.def(
      "crf_infer",
      [](const Eigen::MatrixXd& locations, const Eigen::MatrixXd& colors,
         const Eigen::MatrixXd& probs, const Eigen::MatrixXd& embeddings,
         const std::vector<int>& init_instance, const std::optional<Eigen::MatrixXd>& normals,
         const std::string& config_json) {
        const PointCloud cloud = cloud_from_arrays(locations, colors, normals, std::nullopt,
                                                   std::nullopt, {});
        const PredictionField pred = field_from_arrays(probs, embeddings);
        const InferResult result =
            infer(cloud, pred, init_instance, config_from_json(config_json).crf);
        return py::make_tuple(result.labeling.semantic, result.labeling.instance,
                              result.iterations);
      },
      py::arg("locations"), py::arg("colors"), py::arg("probs"), py::arg("embeddings"),
      py::arg("init_instance"), py::arg("normals") = std::nullopt,
      py::arg("config_json") = std::string(),
      "Joint label relaxation; returns (semantic, instance, iterations)");

  m.def(
      "crf_energy",
      [](const Eigen::MatrixXd& locations, const Eigen::MatrixXd& colors,
         const Eigen::MatrixXd& probs, const Eigen::MatrixXd& embeddings,
         const std::vector<int>& semantic, const std::vector<int>& instance,
         const std::optional<Eigen::MatrixXd>& normals, const std::string& config_json) {
        const PointCloud cloud = cloud_from_arrays(locations, colors, normals, std::nullopt,
                                                   std::nullopt, {});
        const PredictionField pred = field_from_arrays(probs, embeddings);
        JointLabeling labeling;
        labeling.semantic = semantic;
        labeling.instance = instance;
        return energy(cloud, pred, labeling, config_from_json(config_json).crf);
      },
      py::arg("locations"), py::arg("colors"), py::arg("probs"), py::arg("embeddings"),
      py::arg("semantic"), py::arg("instance"), py::arg("normals") = std::nullopt,
      py::arg("config_json") = std::string(),
      "Energy of one joint labeling under the relaxation model");

  m.def(
      "segment_scene",
      [](const py::dict& scene, const NetworkParams& params, const std::string& config_json) {
        const PointCloud cloud = cloud_from_dict(scene);
        const SegmentationResult result =
            segment_scene(cloud, params, config_from_json(config_json));
        py::dict out;
        out["semantic"] = result.semantic;
        out["instance"] = result.instance;
        out["confidences"] = result.confidences;
        out["instance_semantic"] = result.instance_semantic;
        return out;
      },
      py::arg("scene"), py::arg("network"), py::arg("config_json") = std::string(),
      "Full pipeline on one scene dict; ground-truth keys are optional and ignored");

  m.def(
      "train_on_scenes",
      [](const std::vector<py::dict>& scenes, const std::string& config_json) {
        std::vector<PointCloud> clouds;
        clouds.reserve(scenes.size());
        for (const py::dict& scene : scenes) clouds.push_back(cloud_from_dict(scene));
        const RunConfig config = config_from_json(config_json);
        TrainResult result = train_on_scenes(clouds, config);
        return py::make_tuple(std::move(result.params), result.epoch_loss);
      },
      py::arg("scenes"), py::arg("config_json") = std::string(),
      "Trains on labeled scene dicts; returns (network, per-epoch loss)");

  m.def(
      "semantic_metrics",
      [](const std::vector<int>& predicted, const std::vector<int>& ground_truth,
         int num_classes) {
        const SemanticMetrics metrics = semantic_metrics(predicted, ground_truth, num_classes);
        return py::make_tuple(metrics.per_class_accuracy, metrics.micro_mean);
      },
      py::arg("predicted"), py::arg("ground_truth"), py::arg("num_classes"),
      "Returns (per-class accuracy dict, micro-mean accuracy)");

  m.def(
      "instance_ap",
      [](const std::vector<PyInstance>& detections, const std::vector<PyInstance>& ground_truth,
         double iou_threshold) {
        const ApReport report =
            instance_ap(eval_instances(detections), eval_instances(ground_truth), iou_threshold);
        return py::make_tuple(report.per_class_ap, report.mean_ap);
      },
      py::arg("detections"), py::arg("ground_truth"), py::arg("iou_threshold") = 0.5,
      "Instances are (class, confidence, point index list) tuples; returns "
      "(per-class AP dict, mean AP)");
}
