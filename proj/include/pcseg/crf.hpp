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
#include <functional>
#include <vector>

#include "pcseg/cloud.hpp"
#include "pcseg/net.hpp"

namespace pcseg {

/// Which energy terms participate in inference and evaluation.
enum class CrfMode { Unary, Pairwise, Full };

struct CrfConfig {
  double theta = 0.1;    // semantic score kernel width
  double lambda1 = 0.1;  // location kernel width, meters
  double lambda2 = 0.5;  // normal kernel width
  double lambda3 = 0.2;  // color kernel width
  int mf_iters = 10;
  double mf_tol = 1e-3;        // max-abs Q change convergence threshold
  double cov_epsilon = 1e-4;   // ridge added to instance covariances
  double cov_scale = 0.25;     // isotropic covariance for singleton instances
  double prob_floor = 1e-8;
  bool use_normals = true;     // drop the normal kernel factor when false
  CrfMode mode = CrfMode::Full;

  // Optional fast message passing: semantic messages via score-space
  // binning, instance messages via voxel downsampling of the kernel
  // feature space. Exact in the limit of small cells / many bins.
  bool approx_messages = false;
  double approx_cell = 0.5;  // voxel edge in width-scaled feature units
  int approx_bins = 64;      // score histogram resolution

  void validate() const;  // widths and ridges must be positive
};

/// Hard per-instance summary recomputed from argmax assignments.
struct InstanceStats {
  int size = 0;
  Eigen::VectorXd mean;       // embedding centroid
  Eigen::MatrixXd cov;        // population covariance, no ridge
  Eigen::VectorXd histogram;  // semantic label frequencies, sums to 1
};

/// Factorized label distributions plus the per-instance statistics they
/// induce through hard assignment.
struct LabelState {
  Eigen::MatrixXd qs;  // N x |S|
  Eigen::MatrixXd qi;  // N x K over the live instance set
  std::vector<InstanceStats> instances;

  int num_points() const { return static_cast<int>(qs.rows()); }
  int num_classes() const { return static_cast<int>(qs.cols()); }
  int num_instances() const { return static_cast<int>(qi.cols()); }

  /// Row normalization within `tol`, stats present for every instance.
  void validate(double tol = 1e-9) const;
};

struct JointLabeling {
  std::vector<int> semantic;
  std::vector<int> instance;
};

/// Remaps arbitrary non-negative ids to 0..K-1 by first appearance;
/// returns the dense labels and K.
std::pair<std::vector<int>, int> densify_labels(const std::vector<int>& labels);

/// Per-instance size, embedding mean/covariance, and semantic histogram.
/// Singleton instances get the isotropic `singleton_cov` covariance, since
/// their population covariance would be zero.
std::vector<InstanceStats> instance_stats_from_labels(const Eigen::MatrixXd& embeddings,
                                                      const std::vector<int>& semantic,
                                                      const std::vector<int>& dense_instance,
                                                      int instance_count, int num_classes,
                                                      double singleton_cov = 0.25);

// Potentials (energies; lower is better).

double semantic_unary(const PredictionField& pred, int j, int s, double prob_floor = 1e-8);

double semantic_pairwise(const PredictionField& pred, int j, int k, int s, int s_prime,
                         double theta);

/// Normalized multivariate density with the configured ridge added to the
/// stored covariance.
double gaussian_density(const Eigen::VectorXd& x, const InstanceStats& stats,
                        double cov_epsilon);

double instance_unary(const InstanceStats& stats, const Eigen::VectorXd& embedding,
                      const CrfConfig& config);
double instance_unary(const LabelState& state, const Eigen::MatrixXd& embeddings, int j, int i,
                      const CrfConfig& config);

double instance_pairwise(const PointCloud& cloud, int j, int k, int i, int i_prime,
                         const CrfConfig& config);

/// phi(s, i) = -h_i(s) log h_i(s), with 0 log 0 = 0.
double consistency_term(const InstanceStats& stats, int s);

/// Argmax labels and per-instance semantic count vectors of a state, used
/// by the counterfactual consistency terms.
struct ArgmaxCache {
  std::vector<int> semantic;
  std::vector<int> instance;
  Eigen::MatrixXd counts;  // K x |S| member counts by argmax semantic label
};

ArgmaxCache build_argmax_cache(const LabelState& state);

/// Scaled negative entropy of the candidate instance's histogram after
/// substituting vertex j's candidate label, all other vertices held at
/// their argmax labels. Always <= 0.
double m_term_semantic(const LabelState& state, const ArgmaxCache& cache, int j, int s);
double m_term_instance(const LabelState& state, const ArgmaxCache& cache, int j, int i);

/// Total energy of a hard labeling: semantic unary + pairwise, instance
/// unary + pairwise (unordered pairs j < k), and the per-instance semantic
/// entropy. `config.mode` gates the pairwise and entropy groups.
double energy(const PointCloud& cloud, const PredictionField& pred,
              const JointLabeling& labeling, const CrfConfig& config);

/// One parallel update of every row of Q^S and Q^I from the previous state,
/// followed by renormalization, removal of instances that lost all argmax
/// members, and a stats refresh. Pairwise messages are averaged over the
/// other points so their weight against the unaries is size-independent.
LabelState mean_field_step(const LabelState& state, const PointCloud& cloud,
                           const PredictionField& pred, const CrfConfig& config);

/// Builds the initial state: Q^S copies the predicted probabilities, Q^I is
/// a 0.9 / 0.1-smoothed one-hot encoding of the initial clustering.
LabelState init_label_state(const PredictionField& pred,
                            const std::vector<int>& init_instance, int instance_count);

struct InferResult {
  JointLabeling labeling;
  LabelState state;
  int iterations = 0;
};

/// Called after every iteration with (iteration, state, max Q change).
using IterationObserver = std::function<void(int, const LabelState&, double)>;

InferResult infer(const PointCloud& cloud, const PredictionField& pred,
                  const std::vector<int>& init_instance, const CrfConfig& config,
                  const IterationObserver& observer = nullptr);

}  // namespace pcseg
