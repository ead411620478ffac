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

#include <cmath>
#include <limits>

#include "doctest.h"
#include "pcseg/cloud.hpp"

using namespace pcseg;

namespace {

PointCloud labeled_cloud() {
  PointCloud cloud;
  cloud.class_names = {"floor", "crate"};
  for (int i = 0; i < 4; ++i) {
    Vertex v;
    v.location = {0.1 * i, 0.2, 0.0};
    v.color = {0.5, 0.5, 0.5};
    v.normal = Eigen::Vector3d(0, 0, 1);
    v.gt_semantic = i % 2;
    v.gt_instance = i % 2;
    cloud.points.push_back(v);
  }
  return cloud;
}

}  // namespace

TEST_CASE("valid cloud passes validation") {
  PointCloud cloud = labeled_cloud();
  CHECK_NOTHROW(cloud.validate());
  CHECK(cloud.size() == 4);
  CHECK(cloud.has_normals());
  CHECK(cloud.has_ground_truth());
}

TEST_CASE("bounding box spans the points") {
  PointCloud cloud = labeled_cloud();
  const auto [lo, hi] = cloud.bounding_box();
  CHECK(lo.x() == doctest::Approx(0.0));
  CHECK(hi.x() == doctest::Approx(0.3));
  CHECK(lo.y() == doctest::Approx(0.2));
  CHECK(hi.z() == doctest::Approx(0.0));
}

TEST_CASE("label vectors mirror the per-point ground truth") {
  PointCloud cloud = labeled_cloud();
  CHECK(cloud.semantic_labels() == std::vector<int>{0, 1, 0, 1});
  CHECK(cloud.instance_labels() == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("label access without ground truth throws") {
  PointCloud cloud = labeled_cloud();
  for (auto& p : cloud.points) {
    p.gt_semantic.reset();
    p.gt_instance.reset();
  }
  CHECK_THROWS(cloud.semantic_labels());
}

TEST_CASE("non-finite location is rejected") {
  PointCloud cloud = labeled_cloud();
  cloud.points[2].location.y() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(cloud.validate(), doctest::Contains("point 2"), std::invalid_argument);
}

TEST_CASE("color outside the unit cube is rejected") {
  PointCloud cloud = labeled_cloud();
  cloud.points[1].color.x() = 1.5;
  CHECK_THROWS_AS(cloud.validate(), std::invalid_argument);
}

TEST_CASE("non-unit normal is rejected") {
  PointCloud cloud = labeled_cloud();
  cloud.points[0].normal = Eigen::Vector3d(0, 0, 2);
  CHECK_THROWS_AS(cloud.validate(), std::invalid_argument);
}

TEST_CASE("normals must be all-or-none") {
  PointCloud cloud = labeled_cloud();
  cloud.points[3].normal.reset();
  CHECK_THROWS_AS(cloud.validate(), std::invalid_argument);
}

TEST_CASE("semantic label beyond the class table is rejected") {
  PointCloud cloud = labeled_cloud();
  cloud.points[1].gt_semantic = 7;
  CHECK_THROWS_AS(cloud.validate(), std::invalid_argument);
}

TEST_CASE("negative instance id is rejected") {
  PointCloud cloud = labeled_cloud();
  cloud.points[1].gt_instance = -3;
  CHECK_THROWS_AS(cloud.validate(), std::invalid_argument);
}

TEST_CASE("semantic and instance labels come as a pair") {
  PointCloud cloud = labeled_cloud();
  cloud.points[2].gt_instance.reset();
  CHECK_THROWS_AS(cloud.validate(), std::invalid_argument);
}
