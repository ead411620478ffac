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

#include "pcseg/merge.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace pcseg {

namespace {

std::array<long long, 3> voxel_of(const Eigen::Vector3d& p, double voxel_size) {
  return {static_cast<long long>(std::floor(p.x() / voxel_size)),
          static_cast<long long>(std::floor(p.y() / voxel_size)),
          static_cast<long long>(std::floor(p.z() / voxel_size))};
}

}  // namespace

std::vector<int> block_merge(const PointCloud& cloud, const std::vector<Window>& windows,
                             const std::vector<std::vector<int>>& window_instances,
                             const BlockMergeConfig& config, std::ostream* log) {
  if (windows.size() != window_instances.size()) {
    throw std::invalid_argument("one label list per window required");
  }
  if (config.voxel_size <= 0.0 || config.overlap_ratio <= 0.0 || config.overlap_ratio > 1.0) {
    throw std::invalid_argument("bad block-merge parameters");
  }
  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (windows[w].vertex_indices.size() != window_instances[w].size()) {
      throw std::invalid_argument("window " + std::to_string(w) +
                                  ": label count does not match its vertex count");
    }
  }

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Eigen::Vector3d& oa = windows[a].origin;
    const Eigen::Vector3d& ob = windows[b].origin;
    if (oa.x() != ob.x()) return oa.x() < ob.x();
    return oa.y() < ob.y();
  });

  std::vector<int> scene(cloud.size(), -1);
  std::map<std::array<long long, 3>, int> claimed;
  int next_id = 0;

  for (std::size_t w : order) {
    const Window& window = windows[w];
    const std::vector<int>& labels = window_instances[w];

    // Group window entries by their window-local instance id.
    std::map<int, std::vector<int>> groups;  // id -> cloud point indices
    for (std::size_t e = 0; e < labels.size(); ++e) {
      groups[labels[e]].push_back(window.vertex_indices[e]);
    }

    for (auto& [window_id, points] : groups) {
      std::map<int, int> votes;
      for (int p : points) {
        auto it = claimed.find(voxel_of(cloud.points[static_cast<std::size_t>(p)].location,
                                        config.voxel_size));
        if (it != claimed.end()) ++votes[it->second];
      }
      int scene_id = -1;
      int best_votes = 0;
      for (const auto& [candidate, n] : votes) {
        if (n > best_votes) {
          best_votes = n;
          scene_id = candidate;
        }
      }
      const double needed = config.overlap_ratio * static_cast<double>(points.size());
      if (scene_id < 0 || static_cast<double>(best_votes) < needed) {
        scene_id = next_id++;
      }
      for (int p : points) {
        if (scene[static_cast<std::size_t>(p)] < 0) scene[static_cast<std::size_t>(p)] = scene_id;
        claimed.try_emplace(
            voxel_of(cloud.points[static_cast<std::size_t>(p)].location, config.voxel_size),
            scene_id);
      }
    }
  }

  // Windows normally cover everything; stragglers copy their nearest
  // labeled neighbor.
  for (std::size_t p = 0; p < scene.size(); ++p) {
    if (scene[p] >= 0) continue;
    double best = std::numeric_limits<double>::infinity();
    int best_label = -1;
    for (std::size_t q = 0; q < scene.size(); ++q) {
      if (scene[q] < 0) continue;
      const double d = (cloud.points[p].location - cloud.points[q].location).squaredNorm();
      if (d < best) {
        best = d;
        best_label = scene[q];
      }
    }
    if (best_label < 0) throw std::runtime_error("block merge: no labeled point in the scene");
    scene[p] = best_label;
    if (log) {
      *log << "block_merge: point " << p << " uncovered by windows, copied instance "
           << best_label << " from its nearest neighbor\n";
    }
  }
  return densify_labels(scene).first;
}

double instance_confidence(const LabelState& state, int instance, double prob_floor) {
  if (instance < 0 || instance >= state.num_instances()) {
    throw std::invalid_argument("confidence: instance out of range");
  }
  const InstanceStats& stats = state.instances[static_cast<std::size_t>(instance)];
  Eigen::Index majority = 0;
  stats.histogram.maxCoeff(&majority);

  double total = 0.0;
  int members = 0;
  for (Eigen::Index j = 0; j < state.qi.rows(); ++j) {
    Eigen::Index argmax = 0;
    state.qi.row(j).maxCoeff(&argmax);
    if (static_cast<int>(argmax) != instance) continue;
    total += std::log(std::max(state.qs(j, majority), prob_floor)) +
             std::log(std::max(state.qi(j, instance), prob_floor));
    ++members;
  }
  if (members == 0) throw std::invalid_argument("confidence: instance has no members");
  return total / static_cast<double>(members);
}

double point_set_iou(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
  std::sort(sb.begin(), sb.end());
  sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
  std::vector<int> inter;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
  const std::size_t uni = sa.size() + sb.size() - inter.size();
  return uni == 0 ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
}

NmsResult nms(const std::vector<InstanceProposal>& proposals, double iou_threshold) {
  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return proposals[a].confidence > proposals[b].confidence;
  });

  NmsResult result;
  result.absorbed_into.assign(proposals.size(), -1);
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (int keeper : result.kept) {
      if (proposals[static_cast<std::size_t>(keeper)].semantic != proposals[idx].semantic) {
        continue;
      }
      if (point_set_iou(proposals[static_cast<std::size_t>(keeper)].points,
                        proposals[idx].points) > iou_threshold) {
        result.absorbed_into[idx] = keeper;
        suppressed = true;
        break;
      }
    }
    if (!suppressed) result.kept.push_back(static_cast<int>(idx));
  }
  return result;
}

}  // namespace pcseg
