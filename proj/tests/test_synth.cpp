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

#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "pcseg/synth.hpp"

using namespace pcseg;

namespace {

bool same_cloud(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.points[i].location != b.points[i].location) return false;
    if (a.points[i].color != b.points[i].color) return false;
    if (*a.points[i].gt_semantic != *b.points[i].gt_semantic) return false;
    if (*a.points[i].gt_instance != *b.points[i].gt_instance) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("identical seed and recipe give bit-identical clouds") {
  SceneRecipe recipe;
  recipe.class_names = {"floor", "chair"};
  Primitive floor;
  floor.kind = PrimitiveKind::Plane;
  floor.class_id = 0;
  floor.center = {0, 0, 0};
  floor.extent = {2, 2, 0};
  floor.density = 300;
  recipe.primitives.push_back(floor);
  Primitive box;
  box.kind = PrimitiveKind::Box;
  box.class_id = 1;
  box.center = {0.5, 0.5, 0.2};
  box.extent = {0.4, 0.4, 0.4};
  box.density = 300;
  recipe.primitives.push_back(box);

  const PointCloud a = generate_scene(7, recipe);
  const PointCloud b = generate_scene(7, recipe);
  CHECK(same_cloud(a, b));
  const PointCloud c = generate_scene(8, recipe);
  CHECK_FALSE(same_cloud(a, c));
}

TEST_CASE("plane density fixes the point count exactly") {
  SceneRecipe recipe;
  recipe.class_names = {"floor"};
  Primitive plane;
  plane.kind = PrimitiveKind::Plane;
  plane.class_id = 0;
  plane.center = {0, 0, 0};
  plane.extent = {2, 2, 0};
  plane.density = 1000;
  plane.position_noise = 0.0;
  recipe.primitives.push_back(plane);
  const PointCloud cloud = generate_scene(3, recipe);
  CHECK(cloud.size() == 4000);  // area 4 m^2 at 1000 points per m^2
}

TEST_CASE("recipe instances and classes are all present") {
  SceneRecipe recipe;
  recipe.class_names = {"floor", "chair"};
  Primitive plane;
  plane.kind = PrimitiveKind::Plane;
  plane.class_id = 0;
  plane.center = {0, 0, 0};
  plane.extent = {2, 2, 0};
  plane.density = 150;
  recipe.primitives.push_back(plane);
  for (int k = 0; k < 2; ++k) {
    Primitive box;
    box.kind = PrimitiveKind::Box;
    box.class_id = 1;
    box.center = {0.4 * k - 0.5, 0.3, 0.15};
    box.extent = {0.3, 0.3, 0.3};
    box.density = 150;
    recipe.primitives.push_back(box);
  }
  const PointCloud cloud = generate_scene(7, recipe);
  CHECK_NOTHROW(cloud.validate());
  std::set<int> instances, classes;
  for (const auto& p : cloud.points) {
    instances.insert(*p.gt_instance);
    classes.insert(*p.gt_semantic);
  }
  CHECK(instances == std::set<int>{0, 1, 2});
  CHECK(classes == std::set<int>{0, 1});
}

TEST_CASE("empty recipe is an error") {
  SceneRecipe recipe;
  recipe.class_names = {"floor"};
  CHECK_THROWS(generate_scene(1, recipe));
}

TEST_CASE("each instance keeps a single semantic label") {
  SynthConfig config;
  const PointCloud cloud = generate_scene(21, config);
  std::map<int, int> semantic_of;
  for (const auto& p : cloud.points) {
    auto [it, inserted] = semantic_of.try_emplace(*p.gt_instance, *p.gt_semantic);
    CHECK(it->second == *p.gt_semantic);
  }
}

TEST_CASE("default generator respects object count bounds") {
  SynthConfig config;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const PointCloud cloud = generate_scene(seed, config);
    CHECK_NOTHROW(cloud.validate());
    std::set<int> instances;
    for (const auto& p : cloud.points) instances.insert(*p.gt_instance);
    const int objects = static_cast<int>(instances.size()) - 1;  // floor excluded
    CHECK(objects >= config.min_objects);
    CHECK(objects <= config.max_objects);
  }
}

TEST_CASE("default scenes carry normals when requested") {
  SynthConfig config;
  config.with_normals = false;
  const PointCloud bare = generate_scene(5, config);
  CHECK_FALSE(bare.has_normals());
  config.with_normals = true;
  const PointCloud with = generate_scene(5, config);
  CHECK(with.has_normals());
}
