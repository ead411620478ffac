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

#include "pcseg/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "pcseg/rng.hpp"

namespace pcseg {

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

Eigen::Matrix3d yaw_rotation(double yaw) {
  double c = std::cos(yaw), s = std::sin(yaw);
  Eigen::Matrix3d r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

long long sample_count(double area, double density) {
  return std::llround(area * density);
}

void emit_point(PointCloud& cloud, const Primitive& prim, int instance_id,
                const Eigen::Matrix3d& rot, const Eigen::Vector3d& local,
                const Eigen::Vector3d& local_normal, bool with_normals, Rng& rng) {
  Vertex v;
  v.location = prim.center + rot * local;
  if (prim.position_noise > 0.0) {
    v.location += Eigen::Vector3d(rng.normal(0.0, prim.position_noise),
                                  rng.normal(0.0, prim.position_noise),
                                  rng.normal(0.0, prim.position_noise));
  }
  if (with_normals) v.normal = rot * local_normal;
  Eigen::Vector3d c = prim.color;
  if (prim.color_noise > 0.0) {
    c += Eigen::Vector3d(rng.normal(0.0, prim.color_noise),
                         rng.normal(0.0, prim.color_noise),
                         rng.normal(0.0, prim.color_noise));
  }
  v.color = Eigen::Vector3d(clamp01(c.x()), clamp01(c.y()), clamp01(c.z()));
  v.gt_semantic = prim.class_id;
  v.gt_instance = instance_id;
  cloud.points.push_back(v);
}

void sample_plane(PointCloud& cloud, const Primitive& prim, int instance_id,
                  bool with_normals, Rng& rng) {
  const Eigen::Matrix3d rot = yaw_rotation(prim.yaw);
  const double ex = prim.extent.x(), ey = prim.extent.y();
  const long long n = sample_count(ex * ey, prim.density);
  for (long long i = 0; i < n; ++i) {
    Eigen::Vector3d local(rng.uniform(-0.5 * ex, 0.5 * ex),
                          rng.uniform(-0.5 * ey, 0.5 * ey), 0.0);
    emit_point(cloud, prim, instance_id, rot, local, Eigen::Vector3d::UnitZ(),
               with_normals, rng);
  }
}

void sample_box(PointCloud& cloud, const Primitive& prim, int instance_id,
                bool with_normals, Rng& rng) {
  const Eigen::Matrix3d rot = yaw_rotation(prim.yaw);
  const Eigen::Vector3d half = 0.5 * prim.extent;
  // Faces in +-x, +-y, +-z order; u and v span the two free axes.
  for (int axis = 0; axis < 3; ++axis) {
    const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
    const double area = prim.extent[ua] * prim.extent[va];
    for (int sign : {+1, -1}) {
      const long long n = sample_count(area, prim.density);
      for (long long i = 0; i < n; ++i) {
        Eigen::Vector3d local = Eigen::Vector3d::Zero();
        local[axis] = sign * half[axis];
        local[ua] = rng.uniform(-half[ua], half[ua]);
        local[va] = rng.uniform(-half[va], half[va]);
        Eigen::Vector3d normal = Eigen::Vector3d::Zero();
        normal[axis] = sign;
        emit_point(cloud, prim, instance_id, rot, local, normal, with_normals, rng);
      }
    }
  }
}

}  // namespace

Eigen::Vector3d class_color(int class_id) {
  if (class_id <= 0) return {0.68, 0.68, 0.68};
  // Golden-angle hue walk keeps neighboring classes far apart.
  double hue = std::fmod(0.11 + 0.618033988749895 * (class_id - 1), 1.0) * 6.0;
  int sector = static_cast<int>(hue);
  double f = hue - sector;
  const double v = 0.85, s = 0.75;
  double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
  switch (sector % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

PointCloud generate_scene(std::uint64_t seed, const SceneRecipe& recipe) {
  if (recipe.class_names.empty()) {
    throw std::invalid_argument("scene recipe needs at least one class");
  }
  if (recipe.primitives.empty()) {
    throw std::invalid_argument("scene recipe needs at least one primitive");
  }
  PointCloud cloud;
  cloud.class_names = recipe.class_names;
  Rng rng(seed);
  for (std::size_t i = 0; i < recipe.primitives.size(); ++i) {
    const Primitive& prim = recipe.primitives[i];
    if (prim.class_id < 0 || prim.class_id >= static_cast<int>(recipe.class_names.size())) {
      throw std::invalid_argument("primitive class id outside class table");
    }
    if (prim.density <= 0.0 || (prim.extent.array() < 0.0).any()) {
      throw std::invalid_argument("primitive needs positive density and extents");
    }
    Rng prim_rng = rng.fork(i);
    if (prim.kind == PrimitiveKind::Plane) {
      sample_plane(cloud, prim, static_cast<int>(i), recipe.with_normals, prim_rng);
    } else {
      sample_box(cloud, prim, static_cast<int>(i), recipe.with_normals, prim_rng);
    }
  }
  cloud.validate();
  return cloud;
}

PointCloud generate_scene(std::uint64_t seed, const SynthConfig& config) {
  if (config.class_names.size() < 2) {
    throw std::invalid_argument("scene family needs a floor class and at least one object class");
  }
  if (config.min_objects < 1 || config.max_objects < config.min_objects) {
    throw std::invalid_argument("bad object count range");
  }
  Rng rng(seed ^ 0x5ce5e5eedULL);
  SceneRecipe recipe;
  recipe.class_names = config.class_names;
  recipe.with_normals = config.with_normals;

  Primitive floor;
  floor.kind = PrimitiveKind::Plane;
  floor.class_id = 0;
  floor.center = {0.5 * config.scene_extent, 0.5 * config.scene_extent, 0.0};
  floor.extent = {config.scene_extent, config.scene_extent, 0.0};
  floor.density = config.density;
  floor.color = class_color(0);
  floor.color_noise = config.color_noise;
  floor.position_noise = config.position_noise;
  recipe.primitives.push_back(floor);

  const int target = config.min_objects + rng.uniform_int(config.max_objects - config.min_objects + 1);
  std::vector<Eigen::Vector2d> placed;
  const double margin = 0.5 * config.max_object_extent + 0.05;
  for (int k = 0; k < target; ++k) {
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      Eigen::Vector2d c(rng.uniform(margin, config.scene_extent - margin),
                        rng.uniform(margin, config.scene_extent - margin));
      ok = true;
      for (const Eigen::Vector2d& other : placed) {
        if ((c - other).norm() < config.min_separation) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      placed.push_back(c);
      Primitive obj;
      obj.kind = PrimitiveKind::Box;
      obj.class_id = 1 + k % static_cast<int>(config.class_names.size() - 1);
      obj.extent = {rng.uniform(config.min_object_extent, config.max_object_extent),
                    rng.uniform(config.min_object_extent, config.max_object_extent),
                    rng.uniform(config.min_object_extent, config.max_object_extent)};
      obj.center = {c.x(), c.y(), 0.5 * obj.extent.z()};
      obj.yaw = rng.uniform(0.0, 6.283185307179586);
      obj.density = config.density;
      obj.color = class_color(obj.class_id);
      obj.color_noise = config.color_noise;
      obj.position_noise = config.position_noise;
      recipe.primitives.push_back(obj);
    }
  }
  if (static_cast<int>(recipe.primitives.size()) - 1 < config.min_objects) {
    throw std::runtime_error("could not place the requested number of objects");
  }
  return generate_scene(seed, recipe);
}

}  // namespace pcseg
