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
#include <set>
#include <vector>

#include "doctest.h"
#include "pcseg/synth.hpp"
#include "pcseg/windows.hpp"

using namespace pcseg;

namespace {

PointCloud grid_cloud(int per_axis, double extent) {
  PointCloud cloud;
  cloud.class_names = {"a"};
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      Vertex v;
      v.location = {extent * i / (per_axis - 1), extent * j / (per_axis - 1), 0.0};
      cloud.points.push_back(v);
    }
  }
  return cloud;
}

std::set<std::pair<double, double>> origins(const std::vector<Window>& windows) {
  std::set<std::pair<double, double>> out;
  for (const Window& w : windows) out.insert({w.origin.x(), w.origin.y()});
  return out;
}

}  // namespace

TEST_CASE("2m cloud with 1m windows at 0.5m stride scans 9 positions") {
  const PointCloud cloud = grid_cloud(9, 2.0);
  WindowingConfig config;
  config.window = 1.0;
  config.stride = 0.5;
  config.point_count = 64;
  const std::vector<Window> windows = scan_windows(cloud, config, 1);
  CHECK(origins(windows).size() == 9);
}

TEST_CASE("every vertex appears in at least one window") {
  SynthConfig synth;
  const PointCloud cloud = generate_scene(17, synth);
  WindowingConfig config;
  config.point_count = 128;
  const std::vector<Window> windows = scan_windows(cloud, config, 5);
  std::vector<bool> seen(cloud.size(), false);
  for (const Window& w : windows) {
    CHECK(w.vertex_indices.size() == 128);
    for (int idx : w.vertex_indices) seen[static_cast<std::size_t>(idx)] = true;
  }
  CHECK(std::count(seen.begin(), seen.end(), false) == 0);
}

TEST_CASE("rich windows sample unique indices") {
  const PointCloud cloud = grid_cloud(40, 0.5);  // 1600 points inside one window
  WindowingConfig config;
  config.window = 1.0;
  config.stride = 1.0;
  config.point_count = 1000;
  const std::vector<Window> windows = scan_windows(cloud, config, 2);
  REQUIRE(windows.size() == 2);  // 1600 points split into two full windows
  std::set<int> all;
  for (const Window& w : windows) {
    std::set<int> unique(w.vertex_indices.begin(), w.vertex_indices.end());
    CHECK(unique.size() == w.vertex_indices.size());
    all.insert(unique.begin(), unique.end());
  }
  CHECK(all.size() == cloud.size());
}

TEST_CASE("sparse windows pad with replacement") {
  const PointCloud cloud = grid_cloud(5, 0.5);  // 25 points
  WindowingConfig config;
  config.window = 1.0;
  config.stride = 1.0;
  config.point_count = 100;
  const std::vector<Window> windows = scan_windows(cloud, config, 3);
  REQUIRE(windows.size() == 1);
  CHECK(windows[0].vertex_indices.size() == 100);
  std::set<int> unique(windows[0].vertex_indices.begin(), windows[0].vertex_indices.end());
  CHECK(unique.size() == 25);  // every point present, the rest are repeats
}

TEST_CASE("scanning is deterministic in the seed") {
  SynthConfig synth;
  const PointCloud cloud = generate_scene(23, synth);
  WindowingConfig config;
  config.point_count = 64;
  const std::vector<Window> a = scan_windows(cloud, config, 9);
  const std::vector<Window> b = scan_windows(cloud, config, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].vertex_indices == b[i].vertex_indices);
  }
  const std::vector<Window> c = scan_windows(cloud, config, 10);
  bool any_difference = a.size() != c.size();
  for (std::size_t i = 0; !any_difference && i < a.size(); ++i) {
    any_difference = a[i].vertex_indices != c[i].vertex_indices;
  }
  CHECK(any_difference);
}

TEST_CASE("empty cloud yields no windows") {
  PointCloud cloud;
  WindowingConfig config;
  CHECK(scan_windows(cloud, config, 1).empty());
}

TEST_CASE("window features are origin-relative with color and normal") {
  PointCloud cloud;
  cloud.class_names = {"a"};
  Vertex v;
  v.location = {1.0, 2.0, 0.5};
  v.color = {0.25, 0.5, 0.75};
  v.normal = Eigen::Vector3d(0, 0, 1);
  cloud.points.push_back(v);
  WindowingConfig config;
  config.point_count = 4;
  const std::vector<Window> windows = scan_windows(cloud, config, 1);
  REQUIRE(windows.size() == 1);
  const Eigen::MatrixXd features = window_features(cloud, windows[0]);
  REQUIRE(features.rows() == 4);
  REQUIRE(features.cols() == 9);
  CHECK(features(0, 0) == doctest::Approx(v.location.x() - windows[0].origin.x()));
  CHECK(features(0, 3) == doctest::Approx(0.25));
  CHECK(features(0, 8) == doctest::Approx(1.0));

  cloud.points[0].normal.reset();
  const Eigen::MatrixXd bare = window_features(cloud, windows[0]);
  CHECK(bare.block<1, 3>(0, 6).isZero());
}
