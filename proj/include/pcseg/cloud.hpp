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

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pcseg {

/// One point of a colored point cloud. Normals and ground-truth labels are
/// optional; a cloud either has normals on every point or on none.
struct Vertex {
  Eigen::Vector3d location{0.0, 0.0, 0.0};
  std::optional<Eigen::Vector3d> normal;
  Eigen::Vector3d color{0.5, 0.5, 0.5};  // components in [0, 1]
  std::optional<int> gt_semantic;        // index into PointCloud::class_names
  std::optional<int> gt_instance;        // scene-wide instance id, >= 0
};

struct PointCloud {
  std::vector<Vertex> points;
  std::vector<std::string> class_names;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  bool has_normals() const;
  bool has_ground_truth() const;

  /// Axis-aligned bounds as (min corner, max corner). Throws on empty cloud.
  std::pair<Eigen::Vector3d, Eigen::Vector3d> bounding_box() const;

  /// Enforces the type invariants: finite coordinates, colors in [0, 1],
  /// unit normals, labels either absent everywhere or present everywhere,
  /// semantic indices within class_names, instance ids non-negative and
  /// paired with a semantic label. Throws std::invalid_argument.
  void validate() const;

  std::vector<int> semantic_labels() const;  // throws if ground truth missing
  std::vector<int> instance_labels() const;
};

}  // namespace pcseg
