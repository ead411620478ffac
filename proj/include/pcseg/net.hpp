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
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pcseg/embedding_loss.hpp"
#include "pcseg/rng.hpp"

namespace pcseg {

struct DenseLayer {
  Eigen::MatrixXd weights;  // output x input
  Eigen::VectorXd bias;
};

/// Pointwise multi-task network. A shared ReLU trunk runs on every point,
/// its output is max-pooled over the window into a context vector, and the
/// concatenation of both feeds two small heads: class scores (softmax) and
/// an instance embedding.
struct NetworkParams {
  int input_dim = 9;
  int num_classes = 0;
  int embedding_dim = 8;
  std::vector<DenseLayer> trunk;
  std::vector<DenseLayer> class_head;
  std::vector<DenseLayer> embed_head;

  /// Xavier-uniform weights, zero biases. `trunk_widths` are the trunk layer
  /// outputs; `head_width` is the single hidden width of each head.
  static NetworkParams init(int input_dim, int num_classes, int embedding_dim,
                            const std::vector<int>& trunk_widths, int head_width, Rng& rng);

  int trunk_output_dim() const;
  std::size_t parameter_count() const;
  void validate() const;
};

/// Per-point network outputs for one window.
struct PredictionField {
  Eigen::MatrixXd probs;       // n x num_classes, rows sum to one
  Eigen::MatrixXd embeddings;  // n x embedding_dim

  void validate() const;
};

PredictionField forward(const NetworkParams& params, const Eigen::MatrixXd& inputs);

/// Mean cross-entropy of the true class under `probs`.
double cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& semantic);

/// Cross-entropy plus clustering loss on the embeddings.
double total_loss(const PredictionField& field, const std::vector<int>& semantic,
                  const std::vector<int>& instance, const EmbeddingLossConfig& loss_config);

/// Loss and parameter gradients for one window (full backprop, including
/// the max-pool routing). Gradient layout mirrors NetworkParams.
std::pair<double, NetworkParams> backward(const NetworkParams& params,
                                          const Eigen::MatrixXd& inputs,
                                          const std::vector<int>& semantic,
                                          const std::vector<int>& instance,
                                          const EmbeddingLossConfig& loss_config);

struct TrainSample {
  Eigen::MatrixXd inputs;  // n x input_dim
  std::vector<int> semantic;
  std::vector<int> instance;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double decay_factor = 0.5;
  int decay_every = 50;  // epochs
  int epochs = 100;
  int batch_size = 1;  // windows per SGD step, gradients averaged
  std::uint64_t seed = 0;
};

struct TrainResult {
  NetworkParams params;
  std::vector<double> epoch_loss;  // mean over samples, one entry per epoch
};

/// Learning rate of a 0-based epoch: the initial rate decays by the decay
/// factor once per `decay_every` epochs.
double scheduled_learning_rate(const TrainConfig& config, int epoch);

/// Plain SGD with a stepped learning rate schedule; sample order is
/// reshuffled each epoch from the config seed. `progress`, when set, is
/// called after every epoch with (epoch, mean loss).
TrainResult train_network(const std::vector<TrainSample>& samples, NetworkParams params,
                          const TrainConfig& config, const EmbeddingLossConfig& loss_config,
                          const std::function<void(int, double)>& progress = nullptr);

/// Binary model format: 8-byte magic, shape table, float64 payload.
void save_network(const std::string& path, const NetworkParams& params);
NetworkParams load_network(const std::string& path);

/// Text interchange for per-point predictions.
void export_predictions(const std::string& path, const PredictionField& field);
PredictionField import_predictions(const std::string& path);

}  // namespace pcseg
