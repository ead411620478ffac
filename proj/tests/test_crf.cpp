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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "pcseg/crf.hpp"
#include "pcseg/rng.hpp"

using namespace pcseg;

namespace {

Vertex vertex_at(double x, double y, double z) {
  Vertex v;
  v.location = Eigen::Vector3d(x, y, z);
  return v;
}

PointCloud cloud_of(std::size_t n) {
  PointCloud cloud;
  cloud.class_names = {"a", "b"};
  for (std::size_t j = 0; j < n; ++j) {
    cloud.points.push_back(vertex_at(0.01 * static_cast<double>(j), 0.0, 0.0));
  }
  return cloud;
}

PredictionField pred_of(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& embeddings) {
  PredictionField field;
  field.probs = probs;
  field.embeddings = embeddings;
  return field;
}

InstanceStats unit_gaussian(int dim) {
  InstanceStats stats;
  stats.size = 1;
  stats.mean = Eigen::VectorXd::Zero(dim);
  stats.cov = Eigen::MatrixXd::Identity(dim, dim);
  stats.histogram = Eigen::VectorXd::Zero(2);
  stats.histogram[0] = 1.0;
  return stats;
}

}  // namespace

TEST_CASE("semantic unary is the clipped negative log score") {
  PredictionField pred = pred_of(Eigen::MatrixXd(1, 2), Eigen::MatrixXd::Zero(1, 2));
  pred.probs << 1.0, 0.0;
  CHECK(semantic_unary(pred, 0, 0) == 0.0);
  CHECK(semantic_unary(pred, 0, 1) == doctest::Approx(18.420680743952367).epsilon(1e-12));
  CHECK(semantic_unary(pred, 0, 1, 1e-2) == doctest::Approx(4.605170185988091).epsilon(1e-12));
}

TEST_CASE("semantic pairwise attracts equal labels and repels different ones") {
  Eigen::MatrixXd probs(2, 2);
  probs << 0.7, 0.3, 0.7, 0.3;
  PredictionField pred = pred_of(probs, Eigen::MatrixXd::Zero(2, 2));
  CHECK(semantic_pairwise(pred, 0, 1, 0, 0, 0.1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(semantic_pairwise(pred, 0, 1, 1, 1, 0.1) == doctest::Approx(-1.0).epsilon(1e-12));
  // Score gap 0.4 with width 0.1: exp(-0.16 / 0.02) = exp(-8).
  CHECK(semantic_pairwise(pred, 0, 1, 0, 1, 0.1) ==
        doctest::Approx(0.00033546262790251185).epsilon(1e-12));
  CHECK(semantic_pairwise(pred, 0, 1, 1, 0, 0.1) ==
        doctest::Approx(0.00033546262790251185).epsilon(1e-12));
}

TEST_CASE("gaussian density matches the standard normal") {
  const InstanceStats stats = unit_gaussian(2);
  const Eigen::Vector2d at_mean(0.0, 0.0);
  const Eigen::Vector2d off_mean(1.0, 0.0);
  CHECK(gaussian_density(at_mean, stats, 0.0) ==
        doctest::Approx(0.15915494309189535).epsilon(1e-12));
  CHECK(gaussian_density(off_mean, stats, 0.0) ==
        doctest::Approx(0.09653235263005391).epsilon(1e-12));
}

TEST_CASE("covariance ridge alone defines the singleton density") {
  InstanceStats stats = unit_gaussian(2);
  stats.cov.setZero();
  const Eigen::Vector2d at_mean(0.0, 0.0);
  CHECK(gaussian_density(at_mean, stats, 0.25) ==
        doctest::Approx(0.6366197723675814).epsilon(1e-12));
}

TEST_CASE("instance unary rewards dense and large instances") {
  InstanceStats stats = unit_gaussian(2);
  stats.size = 3;
  CrfConfig config;
  config.cov_epsilon = 1e-12;
  const Eigen::Vector2d at_mean(0.0, 0.0);
  CHECK(instance_unary(stats, at_mean, config) ==
        doctest::Approx(-0.15915494309189535 - 1.0986122886681098).epsilon(1e-9));
  stats.size = 0;
  CHECK_THROWS(instance_unary(stats, at_mean, config));
}

TEST_CASE("instance pairwise kernel uses location, color, and normal gaps") {
  PointCloud cloud;
  cloud.class_names = {"a"};
  cloud.points.push_back(vertex_at(0.0, 0.0, 0.0));
  cloud.points.push_back(vertex_at(0.1, 0.0, 0.0));
  CrfConfig config;

  // One location width apart, identical colors, no normals: exp(-1/2).
  CHECK(instance_pairwise(cloud, 0, 1, 0, 0, config) ==
        doctest::Approx(-0.6065306597126334).epsilon(1e-12));
  CHECK(instance_pairwise(cloud, 0, 1, 0, 1, config) ==
        doctest::Approx(0.6065306597126334).epsilon(1e-12));

  cloud.points[0].normal = Eigen::Vector3d(1.0, 0.0, 0.0);
  cloud.points[1].normal = Eigen::Vector3d(0.0, 1.0, 0.0);
  // Normal gap squared 2 with width 0.5 adds exp(-4): total exp(-4.5).
  CHECK(instance_pairwise(cloud, 0, 1, 0, 0, config) ==
        doctest::Approx(-0.011108996538242306).epsilon(1e-12));
  config.use_normals = false;
  CHECK(instance_pairwise(cloud, 0, 1, 0, 0, config) ==
        doctest::Approx(-0.6065306597126334).epsilon(1e-12));
}

TEST_CASE("consistency term is the entropy contribution of one label") {
  InstanceStats stats = unit_gaussian(2);
  stats.histogram << 0.5, 0.5;
  CHECK(consistency_term(stats, 0) == doctest::Approx(0.34657359027997264).epsilon(1e-12));
  CHECK(consistency_term(stats, 0) + consistency_term(stats, 1) ==
        doctest::Approx(0.6931471805599453).epsilon(1e-12));
  stats.histogram << 1.0, 0.0;
  CHECK(consistency_term(stats, 0) == 0.0);
  CHECK(consistency_term(stats, 1) == 0.0);
}

TEST_CASE("densify keeps first-appearance order") {
  const auto [dense, count] = densify_labels({5, 2, 5, 7});
  CHECK(dense == std::vector<int>{0, 1, 0, 2});
  CHECK(count == 3);
  CHECK_THROWS(densify_labels({0, -1}));
}

TEST_CASE("instance statistics summarize members") {
  Eigen::MatrixXd embeddings(3, 2);
  embeddings << 0.0, 0.0, 2.0, 0.0, 5.0, 5.0;
  const std::vector<int> semantic = {0, 1, 1};
  const std::vector<int> instance = {0, 0, 1};
  const auto stats = instance_stats_from_labels(embeddings, semantic, instance, 2, 2, 0.25);
  REQUIRE(stats.size() == 2);

  CHECK(stats[0].size == 2);
  CHECK(stats[0].mean[0] == doctest::Approx(1.0));
  CHECK(stats[0].mean[1] == doctest::Approx(0.0));
  CHECK(stats[0].cov(0, 0) == doctest::Approx(1.0));  // population covariance
  CHECK(stats[0].cov(1, 1) == doctest::Approx(0.0));
  CHECK(stats[0].histogram[0] == doctest::Approx(0.5));
  CHECK(stats[0].histogram[1] == doctest::Approx(0.5));

  CHECK(stats[1].size == 1);
  CHECK(stats[1].cov(0, 0) == doctest::Approx(0.25));
  CHECK(stats[1].cov(0, 1) == doctest::Approx(0.0));
  CHECK(stats[1].histogram[1] == doctest::Approx(1.0));

  CHECK_THROWS(instance_stats_from_labels(embeddings, semantic, {0, 0, 2}, 2, 2, 0.25));
  CHECK_THROWS(instance_stats_from_labels(embeddings, {0, 1}, instance, 2, 2, 0.25));
}

TEST_CASE("counterfactual consistency terms") {
  LabelState state;
  state.qs.resize(3, 2);
  state.qs << 0.9, 0.1, 0.8, 0.2, 0.2, 0.8;
  state.qi.resize(3, 2);
  state.qi << 0.9, 0.1, 0.7, 0.3, 0.1, 0.9;
  const ArgmaxCache cache = build_argmax_cache(state);
  CHECK(cache.semantic == std::vector<int>{0, 0, 1});
  CHECK(cache.instance == std::vector<int>{0, 0, 1});
  CHECK(cache.counts(0, 0) == 2.0);
  CHECK(cache.counts(1, 1) == 1.0);

  // Keeping the pure instance pure costs nothing.
  CHECK(m_term_semantic(state, cache, 0, 0) == 0.0);
  // Flipping one of two members to the other class: -(ln 2) / 2.
  CHECK(m_term_semantic(state, cache, 0, 1) ==
        doctest::Approx(-0.34657359027997264).epsilon(1e-12));
  // Point 2 (class 1) joining the pure class-0 pair: counts (2, 1).
  CHECK(m_term_instance(state, cache, 2, 0) ==
        doctest::Approx(-0.21217138943160432).epsilon(1e-12));
  // Staying put in a pure instance costs nothing.
  CHECK(m_term_instance(state, cache, 0, 0) == 0.0);

  for (int j = 0; j < 3; ++j) {
    for (int s = 0; s < 2; ++s) CHECK(m_term_semantic(state, cache, j, s) <= 0.0);
    for (int i = 0; i < 2; ++i) CHECK(m_term_instance(state, cache, j, i) <= 0.0);
  }
  CHECK_THROWS(m_term_semantic(state, cache, 3, 0));
  CHECK_THROWS(m_term_instance(state, cache, 0, 2));
}

TEST_CASE("energy gates its groups by mode") {
  PointCloud cloud = cloud_of(2);
  Eigen::MatrixXd probs(2, 2);
  probs << 0.8, 0.2, 0.3, 0.7;
  Eigen::MatrixXd embeddings(2, 2);
  embeddings << 0.0, 0.0, 0.2, 0.1;
  const PredictionField pred = pred_of(probs, embeddings);
  const JointLabeling labeling{{0, 1}, {4, 9}};

  CrfConfig config;
  config.mode = CrfMode::Unary;
  const double unary = energy(cloud, pred, labeling, config);
  config.mode = CrfMode::Pairwise;
  const double pairwise = energy(cloud, pred, labeling, config);
  config.mode = CrfMode::Full;
  const double full = energy(cloud, pred, labeling, config);

  const auto [dense, count] = densify_labels(labeling.instance);
  const auto stats = instance_stats_from_labels(pred.embeddings, labeling.semantic, dense,
                                                count, 2, config.cov_scale);
  double expected_unary = 0.0;
  for (int j = 0; j < 2; ++j) {
    expected_unary += semantic_unary(pred, j, labeling.semantic[static_cast<std::size_t>(j)],
                                     config.prob_floor);
    expected_unary += instance_unary(stats[static_cast<std::size_t>(
                                         dense[static_cast<std::size_t>(j)])],
                                     pred.embeddings.row(j).transpose(), config);
  }
  CHECK(unary == doctest::Approx(expected_unary).epsilon(1e-12));

  const double expected_pairwise =
      expected_unary + semantic_pairwise(pred, 0, 1, 0, 1, config.theta) +
      instance_pairwise(cloud, 0, 1, 0, 1, config);
  CHECK(pairwise == doctest::Approx(expected_pairwise).epsilon(1e-12));

  double entropy = 0.0;
  for (const InstanceStats& st : stats) {
    for (int s = 0; s < 2; ++s) entropy += consistency_term(st, s);
  }
  CHECK(full == doctest::Approx(expected_pairwise + entropy).epsilon(1e-12));
  CHECK(entropy == 0.0);  // singletons are pure
}

TEST_CASE("single point energy is the two unaries") {
  PointCloud cloud = cloud_of(1);
  Eigen::MatrixXd probs(1, 2);
  probs << 1.0, 0.0;
  const PredictionField pred = pred_of(probs, Eigen::MatrixXd::Zero(1, 2));
  const JointLabeling labeling{{0}, {0}};
  CrfConfig config;
  config.cov_epsilon = 1e-12;
  for (CrfMode mode : {CrfMode::Unary, CrfMode::Pairwise, CrfMode::Full}) {
    config.mode = mode;
    CHECK(energy(cloud, pred, labeling, config) ==
          doctest::Approx(-0.6366197723675814).epsilon(1e-9));
  }
}

TEST_CASE("initial state smooths the clustering one-hot") {
  Eigen::MatrixXd probs(3, 2);
  probs << 0.6, 0.4, 0.3, 0.7, 0.9, 0.1;
  Eigen::MatrixXd embeddings(3, 2);
  embeddings << 0.0, 0.0, 0.1, 0.0, 3.0, 3.0;
  const PredictionField pred = pred_of(probs, embeddings);
  const LabelState state = init_label_state(pred, {0, 0, 1}, 2);
  state.validate();
  CHECK((state.qs - probs).cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.qi(0, 0) == doctest::Approx(0.95));
  CHECK(state.qi(0, 1) == doctest::Approx(0.05));
  CHECK(state.qi(2, 1) == doctest::Approx(0.95));
  REQUIRE(state.instances.size() == 2);
  CHECK(state.instances[0].size == 2);
  CHECK(state.instances[1].size == 1);
  CHECK_THROWS(init_label_state(pred, {0, 0, 2}, 2));
  CHECK_THROWS(init_label_state(pred, {0, 0}, 2));
}

TEST_CASE("a unary step leaves the semantic field at the network scores") {
  PointCloud cloud = cloud_of(3);
  Eigen::MatrixXd probs(3, 2);
  probs << 0.6, 0.4, 0.3, 0.7, 0.9, 0.1;
  Eigen::MatrixXd embeddings(3, 2);
  embeddings << 0.0, 0.0, 0.1, 0.0, 3.0, 3.0;
  const PredictionField pred = pred_of(probs, embeddings);
  const LabelState state = init_label_state(pred, {0, 0, 1}, 2);
  CrfConfig config;
  config.mode = CrfMode::Unary;
  const LabelState next = mean_field_step(state, cloud, pred, config);
  next.validate();
  CHECK((next.qs - probs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("instances that lose every member disappear") {
  PointCloud cloud = cloud_of(3);
  Eigen::MatrixXd probs = Eigen::MatrixXd::Constant(3, 2, 0.5);
  Eigen::MatrixXd embeddings(3, 2);
  embeddings << 0.0, 0.0, 0.1, 0.0, 0.08, 0.0;
  const PredictionField pred = pred_of(probs, embeddings);
  // Point 2 starts as its own instance but sits inside the tight pair.
  const LabelState state = init_label_state(pred, {0, 0, 1}, 2);
  CrfConfig config;
  config.mode = CrfMode::Unary;
  const LabelState next = mean_field_step(state, cloud, pred, config);
  next.validate();
  REQUIRE(next.qi.cols() == 1);
  REQUIRE(next.instances.size() == 1);
  CHECK(next.instances[0].size == 3);
  CHECK(next.instances[0].mean[0] == doctest::Approx(0.06));
  for (int j = 0; j < 3; ++j) CHECK(next.qi(j, 0) == doctest::Approx(1.0));
}

TEST_CASE("pairwise coupling reinforces agreeing semantic scores") {
  PointCloud cloud = cloud_of(2);
  Eigen::MatrixXd probs(2, 2);
  probs << 0.7, 0.3, 0.7, 0.3;
  Eigen::MatrixXd embeddings(2, 2);
  embeddings << 0.0, 0.0, 0.05, 0.0;
  const PredictionField pred = pred_of(probs, embeddings);
  const LabelState state = init_label_state(pred, {0, 0}, 1);
  CrfConfig config;
  config.mode = CrfMode::Pairwise;
  const LabelState next = mean_field_step(state, cloud, pred, config);
  next.validate();
  CHECK(next.qs(0, 0) > 0.7);
  CHECK(next.qs(0, 0) < 1.0);
  CHECK(next.qs(0, 0) == doctest::Approx(next.qs(1, 0)).epsilon(1e-12));
}

TEST_CASE("inference with zero iterations returns the initialization") {
  PointCloud cloud = cloud_of(3);
  Eigen::MatrixXd probs(3, 2);
  probs << 0.6, 0.4, 0.3, 0.7, 0.9, 0.1;
  Eigen::MatrixXd embeddings(3, 2);
  embeddings << 0.0, 0.0, 0.1, 0.0, 3.0, 3.0;
  const PredictionField pred = pred_of(probs, embeddings);
  CrfConfig config;
  config.mf_iters = 0;
  const InferResult result = infer(cloud, pred, {7, 7, 2}, config);
  CHECK(result.iterations == 0);
  CHECK(result.labeling.semantic == std::vector<int>{0, 1, 0});
  CHECK(result.labeling.instance == std::vector<int>{0, 0, 1});
}

TEST_CASE("unary inference reproduces the network argmax") {
  Rng rng(41);
  const int n = 24;
  PointCloud cloud = cloud_of(static_cast<std::size_t>(n));
  Eigen::MatrixXd probs(n, 2);
  Eigen::MatrixXd embeddings(n, 2);
  std::vector<int> init;
  for (int j = 0; j < n; ++j) {
    const double p = rng.uniform(0.05, 0.95);
    probs.row(j) << p, 1.0 - p;
    const bool left = j < n / 2;
    embeddings.row(j) << (left ? 0.0 : 3.0) + 0.05 * rng.normal(), 0.05 * rng.normal();
    init.push_back(left ? 0 : 1);
  }
  const PredictionField pred = pred_of(probs, embeddings);
  CrfConfig config;
  config.mode = CrfMode::Unary;
  const InferResult result = infer(cloud, pred, init, config);
  for (int j = 0; j < n; ++j) {
    const int network = probs(j, 0) >= probs(j, 1) ? 0 : 1;
    CHECK(result.labeling.semantic[static_cast<std::size_t>(j)] == network);
  }
}

TEST_CASE("full inference converges and does not raise the energy") {
  PointCloud cloud;
  cloud.class_names = {"a", "b"};
  Eigen::MatrixXd probs(6, 2);
  Eigen::MatrixXd embeddings(6, 2);
  std::vector<int> init;
  Rng rng(17);
  for (int j = 0; j < 6; ++j) {
    const bool left = j < 3;
    Vertex v = vertex_at(left ? 0.0 : 1.0, 0.02 * j, 0.0);
    v.color = left ? Eigen::Vector3d(0.9, 0.1, 0.1) : Eigen::Vector3d(0.1, 0.1, 0.9);
    cloud.points.push_back(v);
    const double p = left ? 0.8 : 0.25;
    probs.row(j) << p, 1.0 - p;
    embeddings.row(j) << (left ? 0.0 : 3.0) + 0.02 * rng.normal(), 0.02 * rng.normal();
    init.push_back(left ? 0 : 1);
  }
  const PredictionField pred = pred_of(probs, embeddings);
  CrfConfig config;
  config.mf_iters = 50;

  int calls = 0;
  const InferResult result =
      infer(cloud, pred, init, config, [&](int iteration, const LabelState& state, double) {
        CHECK(iteration == calls);
        state.validate();
        ++calls;
      });
  CHECK(result.iterations == calls);
  CHECK(result.iterations < 50);

  const JointLabeling initial{{0, 0, 0, 1, 1, 1}, init};
  CHECK(energy(cloud, pred, result.labeling, config) <=
        energy(cloud, pred, initial, config) + 1e-9);
  CHECK(result.labeling.instance == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("approximate messages agree with the exact sums when fine") {
  Rng rng(23);
  const int n = 10;
  PointCloud cloud;
  cloud.class_names = {"a", "b"};
  Eigen::MatrixXd probs(n, 2);
  Eigen::MatrixXd embeddings(n, 2);
  std::vector<int> init;
  for (int j = 0; j < n; ++j) {
    Vertex v = vertex_at(rng.uniform(), rng.uniform(), rng.uniform());
    v.color = Eigen::Vector3d(rng.uniform(), rng.uniform(), rng.uniform());
    cloud.points.push_back(v);
    const double p = rng.uniform(0.1, 0.9);
    probs.row(j) << p, 1.0 - p;
    const bool left = j % 2 == 0;
    embeddings.row(j) << (left ? 0.0 : 3.0) + 0.05 * rng.normal(), 0.05 * rng.normal();
    init.push_back(left ? 0 : 1);
  }
  const PredictionField pred = pred_of(probs, embeddings);
  const LabelState state = init_label_state(pred, init, 2);

  CrfConfig exact;
  CrfConfig approx;
  approx.approx_messages = true;
  approx.approx_bins = 1 << 20;
  approx.approx_cell = 1e-6;
  const LabelState a = mean_field_step(state, cloud, pred, exact);
  const LabelState b = mean_field_step(state, cloud, pred, approx);
  REQUIRE(a.qi.cols() == b.qi.cols());
  CHECK((a.qs - b.qs).cwiseAbs().maxCoeff() < 1e-3);
  CHECK((a.qi - b.qi).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("configuration and state validation catch bad values") {
  CrfConfig config;
  config.theta = 0.0;
  CHECK_THROWS(config.validate());
  config = CrfConfig{};
  config.cov_epsilon = 0.0;
  CHECK_THROWS(config.validate());
  config = CrfConfig{};
  config.approx_messages = true;
  config.approx_bins = 0;
  CHECK_THROWS(config.validate());

  Eigen::MatrixXd probs(2, 2);
  probs << 0.6, 0.4, 0.3, 0.7;
  const PredictionField pred = pred_of(probs, Eigen::MatrixXd::Zero(2, 2));
  LabelState state = init_label_state(pred, {0, 0}, 1);
  state.qs(0, 0) += 0.1;
  CHECK_THROWS(state.validate());
  state = init_label_state(pred, {0, 0}, 1);
  state.instances.clear();
  CHECK_THROWS(state.validate());
}
