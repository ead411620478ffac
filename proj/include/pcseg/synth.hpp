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
#include <cstdint>
#include <string>
#include <vector>

#include "pcseg/cloud.hpp"

namespace pcseg {

enum class PrimitiveKind { Plane, Box };

/// One labeled surface of a synthetic scene; each primitive becomes one
/// ground-truth instance. The sampled point count is round(area * density),
/// per face for boxes, so it is independent of the random stream.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Box;
  int class_id = 0;
  Eigen::Vector3d center{0.0, 0.0, 0.0};
  Eigen::Vector3d extent{1.0, 1.0, 1.0};  // z is ignored for planes
  double yaw = 0.0;                        // rotation around z, radians
  double density = 100.0;                  // points per square meter
  Eigen::Vector3d color{0.5, 0.5, 0.5};
  double color_noise = 0.0;                // Gaussian sigma per channel
  double position_noise = 0.0;             // Gaussian sigma per axis
};

struct SceneRecipe {
  std::vector<std::string> class_names;
  std::vector<Primitive> primitives;
  bool with_normals = true;
};

/// Parameters for the built-in scene family: a square floor plane plus a few
/// well-separated boxes, one instance each, colored by class.
struct SynthConfig {
  std::vector<std::string> class_names = {"floor", "panel", "crate"};
  double scene_extent = 2.0;  // floor side length, meters
  int min_objects = 2;
  int max_objects = 5;
  double min_object_extent = 0.25;
  double max_object_extent = 0.45;
  double min_separation = 0.55;  // object center distance on the floor plane
  double density = 220.0;
  double color_noise = 0.02;
  double position_noise = 0.005;
  bool with_normals = true;
};

/// Deterministic color palette; class 0 is a neutral gray.
Eigen::Vector3d class_color(int class_id);

PointCloud generate_scene(std::uint64_t seed, const SceneRecipe& recipe);
PointCloud generate_scene(std::uint64_t seed, const SynthConfig& config);

}  // namespace pcseg
