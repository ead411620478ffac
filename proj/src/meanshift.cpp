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

#include "pcseg/meanshift.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace pcseg {

namespace {

struct Mode {
  Eigen::RowVectorXd position;
  int support = 0;  // neighborhood size at convergence
};

Mode climb(const Eigen::MatrixXd& points, Eigen::RowVectorXd x, double bandwidth,
           double tolerance, int max_iterations) {
  const double radius_sq = bandwidth * bandwidth;
  int support = 0;
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(points.cols());
    support = 0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if ((points.row(i) - x).squaredNorm() <= radius_sq) {
        mean += points.row(i);
        ++support;
      }
    }
    if (support == 0) return {x, 0};
    mean /= static_cast<double>(support);
    const double shift = (mean - x).norm();
    x = mean;
    if (shift < tolerance) break;
  }
  return {x, support};
}

std::vector<Eigen::RowVectorXd> bin_seed_positions(const Eigen::MatrixXd& points,
                                                   double bin_size) {
  std::map<std::vector<long long>, std::pair<Eigen::RowVectorXd, int>> cells;
  std::vector<long long> key(static_cast<std::size_t>(points.cols()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      key[static_cast<std::size_t>(c)] =
          static_cast<long long>(std::floor(points(i, c) / bin_size));
    }
    auto [it, inserted] = cells.try_emplace(
        key, std::make_pair(Eigen::RowVectorXd::Zero(points.cols()), 0));
    it->second.first += points.row(i);
    it->second.second += 1;
  }
  std::vector<Eigen::RowVectorXd> seeds;
  seeds.reserve(cells.size());
  for (const auto& [cell, acc] : cells) {
    seeds.push_back(acc.first / static_cast<double>(acc.second));
  }
  return seeds;
}

}  // namespace

MeanShiftResult mean_shift(const Eigen::MatrixXd& points, const MeanShiftConfig& config) {
  if (config.bandwidth <= 0.0) throw std::invalid_argument("bandwidth must be positive");
  if (config.tolerance < 0.0 || config.max_iterations <= 0) {
    throw std::invalid_argument("bad mean shift stopping rule");
  }
  if (!points.allFinite()) {
    throw std::invalid_argument("mean shift input has non-finite coordinates");
  }
  MeanShiftResult result;
  if (points.rows() == 0) {
    result.modes.resize(0, points.cols());
    return result;
  }

  std::vector<Eigen::RowVectorXd> seeds;
  if (config.bin_seeds) {
    const double bin = config.bin_size > 0.0 ? config.bin_size : config.bandwidth;
    seeds = bin_seed_positions(points, bin);
  } else {
    seeds.reserve(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) seeds.push_back(points.row(i));
  }

  std::vector<Mode> modes(seeds.size());
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    modes[s] = climb(points, seeds[s], config.bandwidth, config.tolerance,
                     config.max_iterations);
  }

  // Collapse modes closer than bandwidth / 2; stronger support claims first.
  std::vector<std::size_t> order(modes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return modes[a].support > modes[b].support;
  });
  const double merge_sq = 0.25 * config.bandwidth * config.bandwidth;
  std::vector<int> cluster_of_mode(modes.size(), -1);
  std::vector<Eigen::RowVectorXd> centers;
  for (std::size_t idx : order) {
    if (modes[idx].support == 0) continue;
    int assigned = -1;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if ((modes[idx].position - centers[c]).squaredNorm() <= merge_sq) {
        assigned = static_cast<int>(c);
        break;
      }
    }
    if (assigned < 0) {
      assigned = static_cast<int>(centers.size());
      centers.push_back(modes[idx].position);
    }
    cluster_of_mode[idx] = assigned;
  }
  if (centers.empty()) throw std::runtime_error("mean shift produced no modes");

  auto nearest_center = [&](const Eigen::RowVectorXd& p) {
    int best = 0;
    double best_d = (p - centers[0]).squaredNorm();
    for (std::size_t c = 1; c < centers.size(); ++c) {
      const double d = (p - centers[c]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    return best;
  };

  result.labels.resize(static_cast<std::size_t>(points.rows()));
  if (config.bin_seeds) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      result.labels[static_cast<std::size_t>(i)] = nearest_center(points.row(i));
    }
  } else {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const int cluster = cluster_of_mode[static_cast<std::size_t>(i)];
      result.labels[static_cast<std::size_t>(i)] =
          cluster >= 0 ? cluster : nearest_center(points.row(i));
    }
  }

  // Drop centers that attracted no points (possible with bin seeding) and
  // renumber the survivors densely.
  std::vector<int> members(centers.size(), 0);
  for (int label : result.labels) ++members[static_cast<std::size_t>(label)];
  std::vector<int> remap(centers.size(), -1);
  int kept = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (members[c] > 0) remap[c] = kept++;
  }
  result.modes.resize(kept, points.cols());
  result.sizes.assign(static_cast<std::size_t>(kept), 0);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (remap[c] >= 0) result.modes.row(remap[c]) = centers[c];
  }
  for (int& label : result.labels) {
    label = remap[static_cast<std::size_t>(label)];
    ++result.sizes[static_cast<std::size_t>(label)];
  }
  return result;
}

}  // namespace pcseg
