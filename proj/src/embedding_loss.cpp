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

#include "pcseg/embedding_loss.hpp"

#include <iostream>
#include <stdexcept>
#include <unordered_map>

namespace pcseg {

void EmbeddingLossConfig::warn_if_unusual() const {
  auto warn = [](const char* what) {
    std::cerr << "embedding loss config: " << what << "\n";
  };
  if (alpha < 0.0) warn("negative pull weight");
  if (beta < 0.0) warn("negative push weight");
  if (gamma < 0.0) warn("negative regularizer weight");
  if (delta_pull < 0.0) warn("negative pull margin");
  if (delta_push < 0.0) warn("negative push margin");
  if (!(delta_push > 2.0 * delta_pull)) {
    warn("push margin should exceed twice the pull margin or clusters may not separate");
  }
}

InstancePartition InstancePartition::from_assignment(const Eigen::MatrixXd& embeddings,
                                                     const std::vector<int>& instance_ids) {
  if (static_cast<Eigen::Index>(instance_ids.size()) != embeddings.rows()) {
    throw std::invalid_argument("one instance id per embedding row required");
  }
  InstancePartition out;
  out.assignment.resize(instance_ids.size());
  std::unordered_map<int, int> dense;
  dense.reserve(instance_ids.size());
  for (std::size_t i = 0; i < instance_ids.size(); ++i) {
    if (instance_ids[i] < 0) {
      throw std::invalid_argument("negative instance id in loss target");
    }
    auto [it, inserted] = dense.try_emplace(instance_ids[i], out.count);
    if (inserted) ++out.count;
    out.assignment[i] = it->second;
  }
  out.sizes.assign(static_cast<std::size_t>(out.count), 0);
  out.centroids = Eigen::MatrixXd::Zero(out.count, embeddings.cols());
  for (std::size_t i = 0; i < out.assignment.size(); ++i) {
    const int k = out.assignment[i];
    ++out.sizes[static_cast<std::size_t>(k)];
    out.centroids.row(k) += embeddings.row(static_cast<Eigen::Index>(i));
  }
  for (int k = 0; k < out.count; ++k) {
    out.centroids.row(k) /= static_cast<double>(out.sizes[static_cast<std::size_t>(k)]);
  }
  return out;
}

double pull_loss(const Eigen::MatrixXd& embeddings, const InstancePartition& partition,
                 double delta_pull) {
  if (partition.count == 0) return 0.0;
  Eigen::VectorXd per_instance = Eigen::VectorXd::Zero(partition.count);
  for (std::size_t i = 0; i < partition.assignment.size(); ++i) {
    const int k = partition.assignment[i];
    const double dist =
        (partition.centroids.row(k) - embeddings.row(static_cast<Eigen::Index>(i))).norm();
    const double hinge = std::max(0.0, dist - delta_pull);
    per_instance[k] += hinge * hinge;
  }
  double total = 0.0;
  for (int k = 0; k < partition.count; ++k) {
    total += per_instance[k] / static_cast<double>(partition.sizes[static_cast<std::size_t>(k)]);
  }
  return total / static_cast<double>(partition.count);
}

double push_loss(const Eigen::MatrixXd& centroids, double delta_push) {
  const int count = static_cast<int>(centroids.rows());
  if (count < 2) return 0.0;
  double total = 0.0;
  for (int k = 0; k < count; ++k) {
    for (int m = 0; m < count; ++m) {
      if (m == k) continue;
      const double gap = 2.0 * delta_push - (centroids.row(k) - centroids.row(m)).norm();
      const double hinge = std::max(0.0, gap);
      total += hinge * hinge;
    }
  }
  return total / (static_cast<double>(count) * static_cast<double>(count - 1));
}

double reg_loss(const Eigen::MatrixXd& centroids) {
  const int count = static_cast<int>(centroids.rows());
  if (count == 0) return 0.0;
  double total = 0.0;
  for (int k = 0; k < count; ++k) total += centroids.row(k).norm();
  return total / static_cast<double>(count);
}

double embedding_loss(const Eigen::MatrixXd& embeddings, const InstancePartition& partition,
                      const EmbeddingLossConfig& config) {
  return config.alpha * pull_loss(embeddings, partition, config.delta_pull) +
         config.beta * push_loss(partition.centroids, config.delta_push) +
         config.gamma * reg_loss(partition.centroids);
}

std::pair<double, Eigen::MatrixXd> embedding_loss_with_grad(
    const Eigen::MatrixXd& embeddings, const InstancePartition& partition,
    const EmbeddingLossConfig& config) {
  const Eigen::Index n = embeddings.rows();
  const Eigen::Index dim = embeddings.cols();
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, dim);
  const int count = partition.count;
  if (count == 0) return {0.0, grad};

  const double inv_count = 1.0 / static_cast<double>(count);
  Eigen::MatrixXd centroid_grad = Eigen::MatrixXd::Zero(count, dim);
  double value = 0.0;

  // Pull: direct part on each member plus the mirrored part on its centroid.
  double pull = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = partition.assignment[static_cast<std::size_t>(i)];
    const double inv_size = 1.0 / static_cast<double>(partition.sizes[static_cast<std::size_t>(k)]);
    const Eigen::RowVectorXd diff = partition.centroids.row(k) - embeddings.row(i);
    const double dist = diff.norm();
    const double hinge = dist - config.delta_pull;
    if (hinge <= 0.0 || dist == 0.0) continue;
    pull += hinge * hinge * inv_size * inv_count;
    const Eigen::RowVectorXd unit = diff / dist;
    const double scale = 2.0 * hinge * inv_size * inv_count * config.alpha;
    grad.row(i) -= scale * unit;
    centroid_grad.row(k) += scale * unit;
  }
  value += config.alpha * pull;

  // Push over ordered centroid pairs.
  if (count >= 2) {
    double push = 0.0;
    const double pair_norm = 1.0 / (static_cast<double>(count) * static_cast<double>(count - 1));
    for (int k = 0; k < count; ++k) {
      for (int m = 0; m < count; ++m) {
        if (m == k) continue;
        const Eigen::RowVectorXd diff = partition.centroids.row(k) - partition.centroids.row(m);
        const double dist = diff.norm();
        const double hinge = 2.0 * config.delta_push - dist;
        if (hinge <= 0.0) continue;
        push += hinge * hinge * pair_norm;
        if (dist == 0.0) continue;
        const Eigen::RowVectorXd unit = diff / dist;
        const double scale = 2.0 * hinge * pair_norm * config.beta;
        centroid_grad.row(k) -= scale * unit;
        centroid_grad.row(m) += scale * unit;
      }
    }
    value += config.beta * push;
  }

  // Regularizer.
  double reg = 0.0;
  for (int k = 0; k < count; ++k) {
    const double dist = partition.centroids.row(k).norm();
    reg += dist * inv_count;
    if (dist > 0.0) {
      centroid_grad.row(k) += config.gamma * inv_count / dist * partition.centroids.row(k);
    }
  }
  value += config.gamma * reg;

  // Each centroid is the mean of its members, so its gradient spreads evenly.
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = partition.assignment[static_cast<std::size_t>(i)];
    grad.row(i) += centroid_grad.row(k) / static_cast<double>(partition.sizes[static_cast<std::size_t>(k)]);
  }
  return {value, grad};
}

}  // namespace pcseg
