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

#include <iosfwd>
#include <vector>

#include "pcseg/cloud.hpp"
#include "pcseg/crf.hpp"
#include "pcseg/windows.hpp"

namespace pcseg {

struct BlockMergeConfig {
  double voxel_size = 0.05;    // meters
  double overlap_ratio = 0.5;  // fraction of points needed to join an instance
};

/// Fuses per-window instance labels into scene-level ids over a shared voxel
/// grid. Windows are visited sorted by origin; a window instance joins the
/// scene instance that already claims at least `overlap_ratio` of its
/// points' voxels, otherwise it opens a fresh id. Points keep their first
/// assignment; voxels keep their first claimant. Points left uncovered
/// inherit the id of their nearest labeled neighbor (noted on `log`).
/// Returned ids are dense from 0.
std::vector<int> block_merge(const PointCloud& cloud, const std::vector<Window>& windows,
                             const std::vector<std::vector<int>>& window_instances,
                             const BlockMergeConfig& config, std::ostream* log = nullptr);

/// Mean over the instance's argmax members of
/// log Q^S(majority class) + log Q^I(instance); floored, so always <= 0.
double instance_confidence(const LabelState& state, int instance, double prob_floor = 1e-8);

struct InstanceProposal {
  int semantic = 0;
  double confidence = 0.0;
  std::vector<int> points;
};

struct NmsResult {
  std::vector<int> kept;           // proposal indices that survive, by descending confidence
  std::vector<int> absorbed_into;  // per proposal: keeper index, or -1 if kept
};

/// Greedy non-maximum suppression on point-set IoU within each class.
NmsResult nms(const std::vector<InstanceProposal>& proposals, double iou_threshold = 0.5);

/// |A intersect B| / |A union B| over point index sets (duplicates ignored).
double point_set_iou(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace pcseg
