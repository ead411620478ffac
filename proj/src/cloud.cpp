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

#include "pcseg/cloud.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pcseg {

namespace {

[[noreturn]] void invalid(std::size_t index, const std::string& what) {
  throw std::invalid_argument("point " + std::to_string(index) + ": " + what);
}

}  // namespace

bool PointCloud::has_normals() const {
  if (points.empty()) return false;
  for (const Vertex& v : points) {
    if (!v.normal) return false;
  }
  return true;
}

bool PointCloud::has_ground_truth() const {
  if (points.empty()) return false;
  for (const Vertex& v : points) {
    if (!v.gt_semantic || !v.gt_instance) return false;
  }
  return true;
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> PointCloud::bounding_box() const {
  if (points.empty()) {
    throw std::invalid_argument("bounding_box: empty cloud");
  }
  Eigen::Vector3d lo = points.front().location;
  Eigen::Vector3d hi = lo;
  for (const Vertex& v : points) {
    lo = lo.cwiseMin(v.location);
    hi = hi.cwiseMax(v.location);
  }
  return {lo, hi};
}

void PointCloud::validate() const {
  const int num_classes = static_cast<int>(class_names.size());
  bool any_normal = false;
  bool any_label = false;
  for (const Vertex& v : points) {
    if (v.normal || v.gt_semantic || v.gt_instance) {
      any_normal = any_normal || v.normal.has_value();
      any_label = any_label || v.gt_semantic.has_value() || v.gt_instance.has_value();
      break;
    }
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vertex& v = points[i];
    if (!v.location.allFinite()) invalid(i, "non-finite location");
    if (!v.color.allFinite()) invalid(i, "non-finite color");
    if ((v.color.array() < 0.0).any() || (v.color.array() > 1.0).any()) {
      invalid(i, "color component outside [0, 1]");
    }
    if (v.normal.has_value() != points.front().normal.has_value()) {
      invalid(i, "normals must be present on every point or on none");
    }
    if (v.normal) {
      if (!v.normal->allFinite()) invalid(i, "non-finite normal");
      if (std::abs(v.normal->norm() - 1.0) > 1e-6) invalid(i, "normal is not unit length");
    }
    if (v.gt_semantic.has_value() != v.gt_instance.has_value()) {
      invalid(i, "semantic and instance labels must come together");
    }
    if (v.gt_semantic.has_value() != points.front().gt_semantic.has_value()) {
      invalid(i, "labels must be present on every point or on none");
    }
    if (v.gt_semantic) {
      if (*v.gt_semantic < 0 || *v.gt_semantic >= num_classes) {
        invalid(i, "semantic index " + std::to_string(*v.gt_semantic) +
                       " outside class table of size " + std::to_string(num_classes));
      }
      if (*v.gt_instance < 0) invalid(i, "negative instance id");
    }
  }
  (void)any_normal;
  (void)any_label;
}

std::vector<int> PointCloud::semantic_labels() const {
  std::vector<int> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].gt_semantic) invalid(i, "missing semantic label");
    out.push_back(*points[i].gt_semantic);
  }
  return out;
}

std::vector<int> PointCloud::instance_labels() const {
  std::vector<int> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].gt_instance) invalid(i, "missing instance label");
    out.push_back(*points[i].gt_instance);
  }
  return out;
}

}  // namespace pcseg
