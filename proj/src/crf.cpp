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

#include "pcseg/crf.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace pcseg {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

int row_argmax(const Eigen::MatrixXd& m, Eigen::Index r) {
  Eigen::Index c = 0;
  m.row(r).maxCoeff(&c);
  return static_cast<int>(c);
}

/// Sum of h log h over a count vector normalized by `size`; 0 log 0 = 0.
double scaled_neg_entropy(const Eigen::VectorXd& counts, double size) {
  double acc = 0.0;
  for (Eigen::Index s = 0; s < counts.size(); ++s) {
    const double h = counts[s] / size;
    if (h > 0.0) acc += h * std::log(h);
  }
  return acc;
}

/// Rows of width-scaled kernel features (location, color, normal) whose
/// squared distances feed exp(-0.5 ||.||^2) = the instance pairwise kernel.
Eigen::MatrixXd kernel_features(const PointCloud& cloud, const CrfConfig& config) {
  const bool normals = config.use_normals && cloud.has_normals();
  const Eigen::Index cols = normals ? 9 : 6;
  Eigen::MatrixXd f(static_cast<Eigen::Index>(cloud.size()), cols);
  for (Eigen::Index j = 0; j < f.rows(); ++j) {
    const Vertex& v = cloud.points[static_cast<std::size_t>(j)];
    f.block<1, 3>(j, 0) = v.location.transpose() / config.lambda1;
    f.block<1, 3>(j, 3) = v.color.transpose() / config.lambda3;
    if (normals) f.block<1, 3>(j, 6) = v.normal->transpose() / config.lambda2;
  }
  return f;
}

/// Message sums entering the semantic update: for every (j, s),
/// sum over k != j and s' of Q^S_k(s') * semantic_pairwise(j, k, s, s').
Eigen::MatrixXd semantic_messages_exact(const LabelState& state, const PredictionField& pred,
                                        const CrfConfig& config) {
  const Eigen::Index n = state.qs.rows();
  const Eigen::Index classes = state.qs.cols();
  const double inv = 1.0 / (2.0 * config.theta * config.theta);
  Eigen::MatrixXd messages = Eigen::MatrixXd::Zero(n, classes);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index s = 0; s < classes; ++s) {
      const double pj = pred.probs(j, s);
      double acc = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k == j) continue;
        for (Eigen::Index sp = 0; sp < classes; ++sp) {
          const double d = pj - pred.probs(k, sp);
          const double kernel = std::exp(-d * d * inv);
          acc += state.qs(k, sp) * (s == sp ? -kernel : kernel);
        }
      }
      messages(j, s) = acc;
    }
  }
  return messages;
}

/// Same sums approximated by quantizing the score axis into bins: the inner
/// sum over k collapses onto a weighted histogram per s', evaluated at the
/// query score. The j = k term is subtracted exactly.
Eigen::MatrixXd semantic_messages_binned(const LabelState& state, const PredictionField& pred,
                                         const CrfConfig& config) {
  const Eigen::Index n = state.qs.rows();
  const Eigen::Index classes = state.qs.cols();
  const int bins = config.approx_bins;
  const double inv = 1.0 / (2.0 * config.theta * config.theta);

  Eigen::MatrixXd hist = Eigen::MatrixXd::Zero(classes, bins);
  auto bin_of = [bins](double x) {
    int b = static_cast<int>(x * bins);
    if (b < 0) b = 0;
    if (b >= bins) b = bins - 1;
    return b;
  };
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index sp = 0; sp < classes; ++sp) {
      hist(sp, bin_of(pred.probs(k, sp))) += state.qs(k, sp);
    }
  }

  Eigen::MatrixXd messages = Eigen::MatrixXd::Zero(n, classes);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index s = 0; s < classes; ++s) {
      const double pj = pred.probs(j, s);
      double acc = 0.0;
      for (Eigen::Index sp = 0; sp < classes; ++sp) {
        double filtered = 0.0;
        for (int b = 0; b < bins; ++b) {
          const double w = hist(sp, b);
          if (w == 0.0) continue;
          const double d = pj - (b + 0.5) / bins;
          filtered += w * std::exp(-d * d * inv);
        }
        const double dself = pj - pred.probs(j, sp);
        filtered -= state.qs(j, sp) * std::exp(-dself * dself * inv);
        acc += (s == sp ? -filtered : filtered);
      }
      messages(j, s) = acc;
    }
  }
  return messages;
}

/// Messages entering the instance update. With Potts compatibility and
/// normalized rows the label sum collapses: for every (j, i),
/// sum over k != j of kernel(j,k) * (1 - 2 Q^I_k(i)).
Eigen::MatrixXd instance_messages_exact(const LabelState& state, const Eigen::MatrixXd& features) {
  const Eigen::Index n = state.qi.rows();
  const Eigen::Index count = state.qi.cols();
  Eigen::MatrixXd messages(n, count);
  Eigen::VectorXd weighted(count);
  for (Eigen::Index j = 0; j < n; ++j) {
    double total = 0.0;
    weighted.setZero();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == j) continue;
      const double kernel = std::exp(-0.5 * (features.row(j) - features.row(k)).squaredNorm());
      total += kernel;
      weighted += kernel * state.qi.row(k).transpose();
    }
    messages.row(j) = Eigen::RowVectorXd::Constant(count, total) -
                      2.0 * weighted.transpose();
  }
  return messages;
}

/// Same sums approximated on a voxel grid over the scaled feature space;
/// each cell contributes through its centroid. The j = k term is removed
/// exactly (kernel value 1 at zero distance).
Eigen::MatrixXd instance_messages_voxel(const LabelState& state, const Eigen::MatrixXd& features,
                                        const CrfConfig& config) {
  const Eigen::Index n = state.qi.rows();
  const Eigen::Index count = state.qi.cols();
  struct Cell {
    double weight = 0.0;
    Eigen::RowVectorXd centroid_sum;
    Eigen::RowVectorXd q_sum;
  };
  std::map<std::vector<long long>, Cell> cells;
  std::vector<long long> key(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      key[static_cast<std::size_t>(c)] =
          static_cast<long long>(std::floor(features(k, c) / config.approx_cell));
    }
    Cell& cell = cells[key];
    if (cell.weight == 0.0) {
      cell.centroid_sum = Eigen::RowVectorXd::Zero(features.cols());
      cell.q_sum = Eigen::RowVectorXd::Zero(count);
    }
    cell.weight += 1.0;
    cell.centroid_sum += features.row(k);
    cell.q_sum += state.qi.row(k);
  }

  Eigen::MatrixXd messages(n, count);
  for (Eigen::Index j = 0; j < n; ++j) {
    double total = 0.0;
    Eigen::RowVectorXd weighted = Eigen::RowVectorXd::Zero(count);
    for (const auto& [cell_key, cell] : cells) {
      const Eigen::RowVectorXd centroid = cell.centroid_sum / cell.weight;
      const double kernel = std::exp(-0.5 * (features.row(j) - centroid).squaredNorm());
      total += kernel * cell.weight;
      weighted += kernel * cell.q_sum;
    }
    total -= 1.0;
    weighted -= state.qi.row(j);
    messages.row(j) = Eigen::RowVectorXd::Constant(count, total) - 2.0 * weighted;
  }
  return messages;
}

void softmax_exponents_into(const Eigen::RowVectorXd& exponents, Eigen::MatrixXd& out,
                            Eigen::Index row) {
  const double peak = exponents.maxCoeff();
  if (!std::isfinite(peak)) {
    throw std::runtime_error("mean-field update row " + std::to_string(row) +
                             " has no finite exponent (all-zero row)");
  }
  Eigen::RowVectorXd shifted = (exponents.array() - peak).exp();
  out.row(row) = shifted / shifted.sum();
}

}  // namespace

void CrfConfig::validate() const {
  if (theta <= 0.0 || lambda1 <= 0.0 || lambda2 <= 0.0 || lambda3 <= 0.0) {
    throw std::invalid_argument("kernel widths must be positive");
  }
  if (cov_epsilon <= 0.0) throw std::invalid_argument("covariance ridge must be positive");
  if (cov_scale <= 0.0) throw std::invalid_argument("singleton covariance must be positive");
  if (mf_iters < 0 || mf_tol < 0.0) throw std::invalid_argument("bad mean-field stopping rule");
  if (prob_floor <= 0.0) throw std::invalid_argument("probability floor must be positive");
  if (approx_messages && (approx_cell <= 0.0 || approx_bins <= 0)) {
    throw std::invalid_argument("bad approximate message-passing resolution");
  }
}

void LabelState::validate(double tol) const {
  if (qs.rows() != qi.rows()) throw std::invalid_argument("Q row count mismatch");
  if (static_cast<int>(instances.size()) != num_instances()) {
    throw std::invalid_argument("instance stats out of sync with Q^I");
  }
  for (Eigen::Index r = 0; r < qs.rows(); ++r) {
    if (std::abs(qs.row(r).sum() - 1.0) > tol || std::abs(qi.row(r).sum() - 1.0) > tol) {
      throw std::invalid_argument("Q row " + std::to_string(r) + " is not normalized");
    }
  }
  for (const InstanceStats& stats : instances) {
    if (stats.size <= 0) throw std::invalid_argument("live instance without members");
    if (std::abs(stats.histogram.sum() - 1.0) > tol) {
      throw std::invalid_argument("instance histogram is not normalized");
    }
  }
}

std::pair<std::vector<int>, int> densify_labels(const std::vector<int>& labels) {
  std::vector<int> dense(labels.size());
  std::unordered_map<int, int> map;
  map.reserve(labels.size());
  int next = 0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0) throw std::invalid_argument("negative instance label");
    auto [it, inserted] = map.try_emplace(labels[j], next);
    if (inserted) ++next;
    dense[j] = it->second;
  }
  return {dense, next};
}

std::vector<InstanceStats> instance_stats_from_labels(const Eigen::MatrixXd& embeddings,
                                                      const std::vector<int>& semantic,
                                                      const std::vector<int>& dense_instance,
                                                      int instance_count, int num_classes,
                                                      double singleton_cov) {
  const Eigen::Index n = embeddings.rows();
  if (static_cast<Eigen::Index>(semantic.size()) != n ||
      static_cast<Eigen::Index>(dense_instance.size()) != n) {
    throw std::invalid_argument("one semantic and instance label per embedding row required");
  }
  const Eigen::Index dim = embeddings.cols();
  std::vector<InstanceStats> stats(static_cast<std::size_t>(instance_count));
  for (InstanceStats& s : stats) {
    s.mean = Eigen::VectorXd::Zero(dim);
    s.cov = Eigen::MatrixXd::Zero(dim, dim);
    s.histogram = Eigen::VectorXd::Zero(num_classes);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const int i = dense_instance[static_cast<std::size_t>(j)];
    if (i < 0 || i >= instance_count) throw std::invalid_argument("instance label out of range");
    const int s = semantic[static_cast<std::size_t>(j)];
    if (s < 0 || s >= num_classes) throw std::invalid_argument("semantic label out of range");
    InstanceStats& st = stats[static_cast<std::size_t>(i)];
    ++st.size;
    st.mean += embeddings.row(j).transpose();
    st.histogram[s] += 1.0;
  }
  for (InstanceStats& st : stats) {
    if (st.size == 0) throw std::invalid_argument("instance without members");
    st.mean /= static_cast<double>(st.size);
    st.histogram /= static_cast<double>(st.size);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    InstanceStats& st = stats[static_cast<std::size_t>(dense_instance[static_cast<std::size_t>(j)])];
    const Eigen::VectorXd d = embeddings.row(j).transpose() - st.mean;
    st.cov += d * d.transpose();
  }
  for (InstanceStats& st : stats) {
    if (st.size == 1) {
      st.cov = singleton_cov * Eigen::MatrixXd::Identity(dim, dim);
    } else {
      st.cov /= static_cast<double>(st.size);
    }
  }
  return stats;
}

double semantic_unary(const PredictionField& pred, int j, int s, double prob_floor) {
  return -std::log(std::max(pred.probs(j, s), prob_floor));
}

double semantic_pairwise(const PredictionField& pred, int j, int k, int s, int s_prime,
                         double theta) {
  const double d = pred.probs(j, s) - pred.probs(k, s_prime);
  const double kernel = std::exp(-d * d / (2.0 * theta * theta));
  return s == s_prime ? -kernel : kernel;
}

double gaussian_density(const Eigen::VectorXd& x, const InstanceStats& stats,
                        double cov_epsilon) {
  const Eigen::Index dim = x.size();
  Eigen::MatrixXd ridged = stats.cov + cov_epsilon * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::LLT<Eigen::MatrixXd> llt(ridged);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("instance covariance is not positive definite");
  }
  const Eigen::VectorXd diff = x - stats.mean;
  const double quad = diff.dot(llt.solve(diff));
  double log_det = 0.0;
  const auto& l = llt.matrixL();
  for (Eigen::Index i = 0; i < dim; ++i) log_det += 2.0 * std::log(l(i, i));
  return std::exp(-0.5 * (dim * kLogTwoPi + log_det + quad));
}

double instance_unary(const InstanceStats& stats, const Eigen::VectorXd& embedding,
                      const CrfConfig& config) {
  if (stats.size <= 0) throw std::invalid_argument("instance unary on a dead instance");
  return -gaussian_density(embedding, stats, config.cov_epsilon) -
         std::log(static_cast<double>(stats.size));
}

double instance_unary(const LabelState& state, const Eigen::MatrixXd& embeddings, int j, int i,
                      const CrfConfig& config) {
  return instance_unary(state.instances.at(static_cast<std::size_t>(i)),
                        embeddings.row(j).transpose(), config);
}

double instance_pairwise(const PointCloud& cloud, int j, int k, int i, int i_prime,
                         const CrfConfig& config) {
  const Vertex& a = cloud.points.at(static_cast<std::size_t>(j));
  const Vertex& b = cloud.points.at(static_cast<std::size_t>(k));
  double exponent = -(a.location - b.location).squaredNorm() /
                        (2.0 * config.lambda1 * config.lambda1) -
                    (a.color - b.color).squaredNorm() / (2.0 * config.lambda3 * config.lambda3);
  if (config.use_normals && a.normal && b.normal) {
    exponent -= (*a.normal - *b.normal).squaredNorm() / (2.0 * config.lambda2 * config.lambda2);
  }
  const double kernel = std::exp(exponent);
  return i == i_prime ? -kernel : kernel;
}

double consistency_term(const InstanceStats& stats, int s) {
  const double h = stats.histogram[s];
  return h > 0.0 ? -h * std::log(h) : 0.0;
}

ArgmaxCache build_argmax_cache(const LabelState& state) {
  ArgmaxCache cache;
  const Eigen::Index n = state.qs.rows();
  cache.semantic.resize(static_cast<std::size_t>(n));
  cache.instance.resize(static_cast<std::size_t>(n));
  cache.counts = Eigen::MatrixXd::Zero(state.num_instances(), state.num_classes());
  for (Eigen::Index j = 0; j < n; ++j) {
    const int s = row_argmax(state.qs, j);
    const int i = row_argmax(state.qi, j);
    cache.semantic[static_cast<std::size_t>(j)] = s;
    cache.instance[static_cast<std::size_t>(j)] = i;
    cache.counts(i, s) += 1.0;
  }
  return cache;
}

double m_term_semantic(const LabelState& state, const ArgmaxCache& cache, int j, int s) {
  if (j < 0 || j >= state.num_points() || s < 0 || s >= state.num_classes()) {
    throw std::invalid_argument("m-term index out of range");
  }
  const int i = cache.instance[static_cast<std::size_t>(j)];
  Eigen::VectorXd counts = cache.counts.row(i).transpose();
  counts[cache.semantic[static_cast<std::size_t>(j)]] -= 1.0;
  counts[s] += 1.0;
  const double size = counts.sum();
  return scaled_neg_entropy(counts, size) / size;
}

double m_term_instance(const LabelState& state, const ArgmaxCache& cache, int j, int i) {
  if (j < 0 || j >= state.num_points() || i < 0 || i >= state.num_instances()) {
    throw std::invalid_argument("m-term index out of range");
  }
  Eigen::VectorXd counts = cache.counts.row(i).transpose();
  if (cache.instance[static_cast<std::size_t>(j)] != i) {
    counts[cache.semantic[static_cast<std::size_t>(j)]] += 1.0;
  }
  const double size = counts.sum();
  return scaled_neg_entropy(counts, size) / size;
}

double energy(const PointCloud& cloud, const PredictionField& pred,
              const JointLabeling& labeling, const CrfConfig& config) {
  config.validate();
  const Eigen::Index n = pred.probs.rows();
  if (static_cast<Eigen::Index>(cloud.size()) != n ||
      static_cast<Eigen::Index>(labeling.semantic.size()) != n ||
      static_cast<Eigen::Index>(labeling.instance.size()) != n) {
    throw std::invalid_argument("energy: cloud, predictions, and labeling sizes differ");
  }
  const int classes = static_cast<int>(pred.probs.cols());
  auto [dense, count] = densify_labels(labeling.instance);
  const std::vector<InstanceStats> stats = instance_stats_from_labels(
      pred.embeddings, labeling.semantic, dense, count, classes, config.cov_scale);

  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const int s = labeling.semantic[static_cast<std::size_t>(j)];
    if (s < 0 || s >= classes) throw std::invalid_argument("semantic label out of range");
    total += semantic_unary(pred, static_cast<int>(j), s, config.prob_floor);
    total += instance_unary(stats[static_cast<std::size_t>(dense[static_cast<std::size_t>(j)])],
                            pred.embeddings.row(j).transpose(), config);
  }
  if (config.mode != CrfMode::Unary) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = j + 1; k < n; ++k) {
        total += semantic_pairwise(pred, static_cast<int>(j), static_cast<int>(k),
                                   labeling.semantic[static_cast<std::size_t>(j)],
                                   labeling.semantic[static_cast<std::size_t>(k)], config.theta);
        total += instance_pairwise(cloud, static_cast<int>(j), static_cast<int>(k),
                                   dense[static_cast<std::size_t>(j)],
                                   dense[static_cast<std::size_t>(k)], config);
      }
    }
  }
  if (config.mode == CrfMode::Full) {
    for (const InstanceStats& st : stats) {
      for (int s = 0; s < classes; ++s) total += consistency_term(st, s);
    }
  }
  return total;
}

LabelState mean_field_step(const LabelState& state, const PointCloud& cloud,
                           const PredictionField& pred, const CrfConfig& config) {
  config.validate();
  state.validate();
  const Eigen::Index n = state.qs.rows();
  if (static_cast<Eigen::Index>(cloud.size()) != n || pred.probs.rows() != n) {
    throw std::invalid_argument("mean-field step: cloud, predictions, and state sizes differ");
  }
  const Eigen::Index classes = state.qs.cols();
  const Eigen::Index count = state.qi.cols();
  const bool pairwise = config.mode != CrfMode::Unary;
  const bool consistency = config.mode == CrfMode::Full;

  Eigen::MatrixXd semantic_msg, instance_msg;
  if (pairwise) {
    semantic_msg = config.approx_messages ? semantic_messages_binned(state, pred, config)
                                          : semantic_messages_exact(state, pred, config);
    const Eigen::MatrixXd features = kernel_features(cloud, config);
    instance_msg = config.approx_messages
                       ? instance_messages_voxel(state, features, config)
                       : instance_messages_exact(state, features);
    // Messages enter the update as neighborhood averages: raw sums grow with
    // the point count and would drown the unaries on scene-sized problems.
    if (n > 1) {
      const double scale = 1.0 / static_cast<double>(n - 1);
      semantic_msg *= scale;
      instance_msg *= scale;
    }
  }
  ArgmaxCache cache;
  if (consistency) cache = build_argmax_cache(state);

  LabelState next;
  next.qs.resize(n, classes);
  next.qi.resize(n, count);
  Eigen::RowVectorXd exponents;
  for (Eigen::Index j = 0; j < n; ++j) {
    exponents.resize(classes);
    for (Eigen::Index s = 0; s < classes; ++s) {
      double e = -semantic_unary(pred, static_cast<int>(j), static_cast<int>(s),
                                 config.prob_floor);
      if (pairwise) e -= semantic_msg(j, s);
      if (consistency) {
        e += m_term_semantic(state, cache, static_cast<int>(j), static_cast<int>(s));
      }
      exponents[s] = e;
    }
    softmax_exponents_into(exponents, next.qs, j);

    exponents.resize(count);
    for (Eigen::Index i = 0; i < count; ++i) {
      double e = -instance_unary(state.instances[static_cast<std::size_t>(i)],
                                 pred.embeddings.row(j).transpose(), config);
      if (pairwise) e -= instance_msg(j, i);
      if (consistency) {
        e += m_term_instance(state, cache, static_cast<int>(j), static_cast<int>(i));
      }
      exponents[i] = e;
    }
    softmax_exponents_into(exponents, next.qi, j);
  }

  // Drop instances that lost every argmax member, renormalize the remaining
  // columns, and refresh the hard statistics.
  std::vector<int> assignment(static_cast<std::size_t>(n));
  std::vector<int> members(static_cast<std::size_t>(count), 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int i = row_argmax(next.qi, j);
    assignment[static_cast<std::size_t>(j)] = i;
    ++members[static_cast<std::size_t>(i)];
  }
  std::vector<int> remap(static_cast<std::size_t>(count), -1);
  int live = 0;
  for (Eigen::Index i = 0; i < count; ++i) {
    if (members[static_cast<std::size_t>(i)] > 0) remap[static_cast<std::size_t>(i)] = live++;
  }
  if (live == 0) throw std::runtime_error("mean-field step left no live instance");
  if (live != count) {
    Eigen::MatrixXd compact(n, live);
    for (Eigen::Index i = 0; i < count; ++i) {
      if (remap[static_cast<std::size_t>(i)] >= 0) {
        compact.col(remap[static_cast<std::size_t>(i)]) = next.qi.col(i);
      }
    }
    const Eigen::VectorXd sums = compact.rowwise().sum();
    for (Eigen::Index r = 0; r < n; ++r) compact.row(r) /= sums[r];
    next.qi = std::move(compact);
    for (int& a : assignment) a = remap[static_cast<std::size_t>(a)];
  }

  std::vector<int> semantic(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) semantic[static_cast<std::size_t>(j)] = row_argmax(next.qs, j);
  next.instances = instance_stats_from_labels(pred.embeddings, semantic, assignment, live,
                                              static_cast<int>(classes), config.cov_scale);
  return next;
}

LabelState init_label_state(const PredictionField& pred,
                            const std::vector<int>& init_instance, int instance_count) {
  pred.validate();
  const Eigen::Index n = pred.probs.rows();
  if (static_cast<Eigen::Index>(init_instance.size()) != n) {
    throw std::invalid_argument("one initial instance label per point required");
  }
  if (instance_count <= 0) throw std::invalid_argument("initial clustering is empty");
  LabelState state;
  state.qs = pred.probs;
  state.qi = Eigen::MatrixXd::Constant(n, instance_count, 0.1 / instance_count);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int i = init_instance[static_cast<std::size_t>(j)];
    if (i < 0 || i >= instance_count) {
      throw std::invalid_argument("initial instance label out of range");
    }
    state.qi(j, i) += 0.9;
  }
  std::vector<int> semantic(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) semantic[static_cast<std::size_t>(j)] = row_argmax(state.qs, j);
  state.instances = instance_stats_from_labels(pred.embeddings, semantic, init_instance,
                                               instance_count, static_cast<int>(pred.probs.cols()));
  return state;
}

InferResult infer(const PointCloud& cloud, const PredictionField& pred,
                  const std::vector<int>& init_instance, const CrfConfig& config,
                  const IterationObserver& observer) {
  config.validate();
  auto [dense, count] = densify_labels(init_instance);
  LabelState state = init_label_state(pred, dense, count);
  // Singleton covariances must follow the config, not the constructor default.
  {
    ArgmaxCache cache = build_argmax_cache(state);
    state.instances = instance_stats_from_labels(pred.embeddings, cache.semantic,
                                                 cache.instance, count,
                                                 static_cast<int>(pred.probs.cols()),
                                                 config.cov_scale);
  }

  InferResult result;
  for (int it = 0; it < config.mf_iters; ++it) {
    LabelState next = mean_field_step(state, cloud, pred, config);
    double change;
    if (next.qi.cols() != state.qi.cols()) {
      change = 1.0;
    } else {
      change = std::max((next.qs - state.qs).cwiseAbs().maxCoeff(),
                        (next.qi - state.qi).cwiseAbs().maxCoeff());
    }
    state = std::move(next);
    result.iterations = it + 1;
    if (observer) observer(it, state, change);
    if (change < config.mf_tol) break;
  }

  const Eigen::Index n = state.qs.rows();
  result.labeling.semantic.resize(static_cast<std::size_t>(n));
  result.labeling.instance.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    result.labeling.semantic[static_cast<std::size_t>(j)] = row_argmax(state.qs, j);
    result.labeling.instance[static_cast<std::size_t>(j)] = row_argmax(state.qi, j);
  }
  result.state = std::move(state);
  return result;
}

}  // namespace pcseg
