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
#include <utility>
#include <vector>

namespace pcseg {

/// Weights of the clustering loss on instance embeddings. The loss pulls
/// members toward their instance centroid once they stray beyond
/// `delta_pull`, pushes centroids of different instances apart until they
/// clear `2 * delta_push`, and weakly shrinks all centroids toward zero.
struct EmbeddingLossConfig {
  double alpha = 1.0;       // pull weight
  double beta = 1.0;        // push weight
  double gamma = 0.001;     // regularizer weight
  double delta_pull = 0.5;  // slack around the centroid
  double delta_push = 1.5;  // half the required centroid separation

  /// Prints a warning per questionable field (negative weights or margins)
  /// to stderr; never throws.
  void warn_if_unusual() const;
};

/// Instance membership in dense form: ids remapped to 0..count-1 in order of
/// first appearance, plus per-instance sizes and embedding centroids.
struct InstancePartition {
  std::vector<int> assignment;  // one dense id per embedding row
  std::vector<int> sizes;       // count entries
  Eigen::MatrixXd centroids;    // count x dim
  int count = 0;

  static InstancePartition from_assignment(const Eigen::MatrixXd& embeddings,
                                           const std::vector<int>& instance_ids);
};

/// Mean over instances of the mean squared hinge distance of members to
/// their centroid.
double pull_loss(const Eigen::MatrixXd& embeddings, const InstancePartition& partition,
                 double delta_pull);

/// Mean over ordered centroid pairs of the squared hinge of the missing
/// separation; zero for fewer than two instances.
double push_loss(const Eigen::MatrixXd& centroids, double delta_push);

/// Mean centroid norm.
double reg_loss(const Eigen::MatrixXd& centroids);

double embedding_loss(const Eigen::MatrixXd& embeddings, const InstancePartition& partition,
                      const EmbeddingLossConfig& config);

/// Loss plus its gradient with respect to every embedding row. The gradient
/// includes the dependence of the centroids on their members; hinge kinks
/// and zero-distance ties use the zero subgradient.
std::pair<double, Eigen::MatrixXd> embedding_loss_with_grad(
    const Eigen::MatrixXd& embeddings, const InstancePartition& partition,
    const EmbeddingLossConfig& config);

}  // namespace pcseg
