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

#include "pcseg/windows.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pcseg/rng.hpp"

namespace pcseg {

namespace {

std::vector<double> axis_origins(double lo, double extent, double window, double stride) {
  if (extent <= window) return {lo};
  const int last = static_cast<int>(std::ceil((extent - window) / stride));
  std::vector<double> origins;
  origins.reserve(static_cast<std::size_t>(last) + 1);
  for (int i = 0; i <= last; ++i) {
    origins.push_back(std::min(lo + i * stride, lo + extent - window));
  }
  return origins;
}

}  // namespace

std::vector<Window> scan_windows(const PointCloud& cloud, const WindowingConfig& config,
                                 std::uint64_t seed) {
  if (config.window <= 0.0 || config.stride <= 0.0) {
    throw std::invalid_argument("window and stride must be positive");
  }
  if (config.point_count <= 0) {
    throw std::invalid_argument("point count must be positive");
  }
  if (cloud.empty()) return {};

  const auto [lo, hi] = cloud.bounding_box();
  const Eigen::Vector3d extent = hi - lo;
  const std::vector<double> xs = axis_origins(lo.x(), extent.x(), config.window, config.stride);
  const std::vector<double> ys = axis_origins(lo.y(), extent.y(), config.window, config.stride);
  const int points_total = static_cast<int>(cloud.size());
  const int T = config.point_count;

  Rng rng(seed ^ 0x9d15c0ffeeULL);
  std::vector<Window> windows;
  std::size_t position = 0;
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t yi = 0; yi < ys.size(); ++yi) {
    const double oy = ys[yi];
    // The trailing position on each axis absorbs boundary points that
    // rounding would otherwise leave just outside the closed edge.
    const double y_hi = yi + 1 == ys.size() ? inf : oy + config.window;
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
      const double ox = xs[xi];
      const double x_hi = xi + 1 == xs.size() ? inf : ox + config.window;
      Rng pos_rng = rng.fork(position++);
      std::vector<int> member;
      for (int i = 0; i < points_total; ++i) {
        const Eigen::Vector3d& p = cloud.points[static_cast<std::size_t>(i)].location;
        if (p.x() >= ox && p.x() <= x_hi && p.y() >= oy && p.y() <= y_hi) {
          member.push_back(i);
        }
      }
      if (member.empty()) continue;

      Window base;
      base.origin = {ox, oy, lo.z()};
      base.size = {config.window, config.window, extent.z()};

      const int M = static_cast<int>(member.size());
      if (M >= T) {
        pos_rng.shuffle(member);
        const int chunks = (M + T - 1) / T;
        for (int c = 0; c < chunks; ++c) {
          Window w = base;
          w.vertex_indices.reserve(static_cast<std::size_t>(T));
          const int begin = c * T;
          const int end = std::min(begin + T, M);
          for (int i = begin; i < end; ++i) w.vertex_indices.push_back(member[static_cast<std::size_t>(i)]);
          // The tail chunk borrows from the front of the shuffle to reach
          // full size without duplicating anything inside the chunk.
          for (int i = 0; i < T - (end - begin); ++i) {
            w.vertex_indices.push_back(member[static_cast<std::size_t>(i)]);
          }
          windows.push_back(std::move(w));
        }
      } else {
        Window w = base;
        w.vertex_indices = member;
        for (int i = M; i < T; ++i) {
          w.vertex_indices.push_back(member[static_cast<std::size_t>(pos_rng.uniform_int(M))]);
        }
        pos_rng.shuffle(w.vertex_indices);
        windows.push_back(std::move(w));
      }
    }
  }
  return windows;
}

Eigen::MatrixXd window_features(const PointCloud& cloud, const Window& window) {
  Eigen::MatrixXd features(static_cast<Eigen::Index>(window.vertex_indices.size()), 9);
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    const Vertex& v = cloud.points[static_cast<std::size_t>(window.vertex_indices[static_cast<std::size_t>(r)])];
    features.block<1, 3>(r, 0) = (v.location - window.origin).transpose();
    features.block<1, 3>(r, 3) = v.color.transpose();
    if (v.normal) {
      features.block<1, 3>(r, 6) = v.normal->transpose();
    } else {
      features.block<1, 3>(r, 6).setZero();
    }
  }
  return features;
}

}  // namespace pcseg
