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
#include <vector>

#include "pcseg/cloud.hpp"

namespace pcseg {

/// A fixed-size sample of the points inside one scan position. Windows tile
/// the x-y bounding rectangle and span the full height.
struct Window {
  Eigen::Vector3d origin;             // min corner; z is the scene minimum
  Eigen::Vector3d size;               // x/y window side, z full extent
  std::vector<int> vertex_indices;    // exactly point_count entries
};

struct WindowingConfig {
  double window = 1.0;    // side length, meters
  double stride = 0.5;    // offset between neighboring positions
  int point_count = 1024; // points per window
};

/// Tiles the cloud with overlapping square windows and resamples each
/// position to exactly `point_count` indices. Positions holding more points
/// are split into several windows so that every point appears in at least
/// one window; positions holding fewer repeat points. Empty positions are
/// dropped. Deterministic in (cloud, config, seed).
std::vector<Window> scan_windows(const PointCloud& cloud, const WindowingConfig& config,
                                 std::uint64_t seed);

/// Per-point network inputs for one window, one row per index: position
/// relative to the window origin, color, then normal (zeros when the cloud
/// has no normals).
Eigen::MatrixXd window_features(const PointCloud& cloud, const Window& window);

}  // namespace pcseg
