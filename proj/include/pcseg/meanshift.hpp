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
#include <vector>

namespace pcseg {

struct MeanShiftConfig {
  double bandwidth = 1.5;     // flat kernel radius
  double tolerance = 1e-4;    // stop once the mode moves less than this
  int max_iterations = 300;
  bool bin_seeds = false;     // seed from grid cells instead of every point
  double bin_size = 0.0;      // cell side for bin seeding; bandwidth when <= 0
};

struct MeanShiftResult {
  std::vector<int> labels;  // one cluster id per input row, dense from 0
  Eigen::MatrixXd modes;    // cluster count x dim
  std::vector<int> sizes;   // members per cluster
};

/// Flat-kernel mean shift. Every seed walks to the mean of its in-radius
/// neighborhood until it converges; converged modes closer than half the
/// bandwidth collapse into one cluster (larger support wins). Deterministic
/// for a fixed input.
MeanShiftResult mean_shift(const Eigen::MatrixXd& points, const MeanShiftConfig& config);

}  // namespace pcseg
