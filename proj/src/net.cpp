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

#include "pcseg/net.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pcseg/io_error.hpp"

static_assert(std::endian::native == std::endian::little,
              "model serialization assumes a little-endian host");

namespace pcseg {

namespace {

constexpr char kModelMagic[8] = {'P', 'C', 'S', 'E', 'G', 'M', 'D', 'L'};
constexpr std::int32_t kModelVersion = 1;

DenseLayer xavier_layer(int out, int in, Rng& rng) {
  DenseLayer layer;
  layer.weights.resize(out, in);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) {
      layer.weights(r, c) = rng.uniform(-limit, limit);
    }
  }
  layer.bias = Eigen::VectorXd::Zero(out);
  return layer;
}

Eigen::MatrixXd dense(const DenseLayer& layer, const Eigen::MatrixXd& input) {
  return (input * layer.weights.transpose()).rowwise() + layer.bias.transpose();
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& m) { return m.cwiseMax(0.0); }

struct ForwardCache {
  std::vector<Eigen::MatrixXd> trunk;  // trunk[0] = inputs, then post-ReLU
  std::vector<Eigen::Index> pool_rows; // argmax row per pooled channel
  Eigen::MatrixXd joint;               // point features ++ pooled context
  std::vector<Eigen::MatrixXd> class_acts;  // head inputs per layer
  std::vector<Eigen::MatrixXd> embed_acts;
  Eigen::MatrixXd probs;
  Eigen::MatrixXd embeddings;
};

/// Runs a head; `acts` receives the input of every layer. ReLU sits between
/// layers but not after the last one.
Eigen::MatrixXd run_head(const std::vector<DenseLayer>& head, const Eigen::MatrixXd& input,
                         std::vector<Eigen::MatrixXd>& acts) {
  acts.clear();
  Eigen::MatrixXd h = input;
  for (std::size_t l = 0; l < head.size(); ++l) {
    acts.push_back(h);
    h = dense(head[l], h);
    if (l + 1 < head.size()) h = relu(h);
  }
  return h;
}

ForwardCache forward_cached(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != params.input_dim) {
    throw std::invalid_argument("input feature width does not match the network");
  }
  if (inputs.rows() == 0) {
    throw std::invalid_argument("forward pass needs at least one point");
  }
  ForwardCache cache;
  cache.trunk.reserve(params.trunk.size() + 1);
  cache.trunk.push_back(inputs);
  for (const DenseLayer& layer : params.trunk) {
    cache.trunk.push_back(relu(dense(layer, cache.trunk.back())));
  }
  const Eigen::MatrixXd& local = cache.trunk.back();
  const Eigen::Index n = local.rows();
  const Eigen::Index dim = local.cols();

  cache.pool_rows.resize(static_cast<std::size_t>(dim));
  Eigen::RowVectorXd context(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    Eigen::Index row = 0;
    local.col(c).maxCoeff(&row);
    cache.pool_rows[static_cast<std::size_t>(c)] = row;
    context[c] = local(row, c);
  }
  cache.joint.resize(n, 2 * dim);
  cache.joint.leftCols(dim) = local;
  cache.joint.rightCols(dim) = context.replicate(n, 1);

  Eigen::MatrixXd logits = run_head(params.class_head, cache.joint, cache.class_acts);
  Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = (logits.colwise() - row_max).array().exp();
  cache.probs = shifted.array().colwise() / shifted.rowwise().sum().array();

  cache.embeddings = run_head(params.embed_head, cache.joint, cache.embed_acts);
  return cache;
}

/// Backpropagates through a head; returns the gradient at the head input and
/// fills `grads` (one entry per layer).
Eigen::MatrixXd head_backward(const std::vector<DenseLayer>& head,
                              const std::vector<Eigen::MatrixXd>& acts,
                              Eigen::MatrixXd delta, std::vector<DenseLayer>& grads) {
  grads.resize(head.size());
  for (std::size_t l = head.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = acts[l];
    grads[l].weights = delta.transpose() * input;
    grads[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * head[l].weights).cwiseProduct(
          (acts[l].array() > 0.0).cast<double>().matrix());
    } else {
      delta = delta * head[l].weights;
    }
  }
  return delta;
}

void write_i32(std::ostream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::int32_t read_i32(const std::string& data, std::size_t& pos) {
  if (pos + sizeof(std::int32_t) > data.size()) {
    throw IoError("model file truncated at byte " + std::to_string(pos));
  }
  std::int32_t v;
  std::memcpy(&v, data.data() + pos, sizeof(v));
  pos += sizeof(v);
  return v;
}

void write_layer_shapes(std::ostream& out, const std::vector<DenseLayer>& layers) {
  write_i32(out, static_cast<std::int32_t>(layers.size()));
  for (const DenseLayer& layer : layers) {
    write_i32(out, static_cast<std::int32_t>(layer.weights.rows()));
    write_i32(out, static_cast<std::int32_t>(layer.weights.cols()));
  }
}

void write_layer_payload(std::ostream& out, const std::vector<DenseLayer>& layers) {
  for (const DenseLayer& layer : layers) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      out.write(reinterpret_cast<const char*>(layer.weights.row(r).eval().data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(layer.weights.cols())));
    }
    out.write(reinterpret_cast<const char*>(layer.bias.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(layer.bias.size())));
  }
}

std::vector<DenseLayer> read_layer_shapes(const std::string& data, std::size_t& pos) {
  const std::int32_t count = read_i32(data, pos);
  if (count < 0 || count > 1024) throw IoError("implausible layer count in model file");
  std::vector<DenseLayer> layers(static_cast<std::size_t>(count));
  for (DenseLayer& layer : layers) {
    const std::int32_t rows = read_i32(data, pos);
    const std::int32_t cols = read_i32(data, pos);
    if (rows <= 0 || cols <= 0 || rows > 1 << 20 || cols > 1 << 20) {
      throw IoError("implausible layer shape in model file");
    }
    layer.weights.resize(rows, cols);
    layer.bias.resize(rows);
  }
  return layers;
}

void read_layer_payload(const std::string& data, std::size_t& pos,
                        std::vector<DenseLayer>& layers) {
  for (DenseLayer& layer : layers) {
    const std::size_t wbytes =
        sizeof(double) * static_cast<std::size_t>(layer.weights.size());
    const std::size_t bbytes = sizeof(double) * static_cast<std::size_t>(layer.bias.size());
    if (pos + wbytes + bbytes > data.size()) {
      throw IoError("model file truncated at byte " + std::to_string(pos));
    }
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(layer.weights.cols()));
      std::memcpy(row.data(), data.data() + pos, sizeof(double) * row.size());
      pos += sizeof(double) * row.size();
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = row[static_cast<std::size_t>(c)];
      }
    }
    std::memcpy(layer.bias.data(), data.data() + pos, bbytes);
    pos += bbytes;
  }
}

}  // namespace

NetworkParams NetworkParams::init(int input_dim, int num_classes, int embedding_dim,
                                  const std::vector<int>& trunk_widths, int head_width,
                                  Rng& rng) {
  if (input_dim <= 0 || num_classes <= 0 || embedding_dim <= 0 || head_width <= 0 ||
      trunk_widths.empty()) {
    throw std::invalid_argument("network dimensions must be positive");
  }
  NetworkParams params;
  params.input_dim = input_dim;
  params.num_classes = num_classes;
  params.embedding_dim = embedding_dim;
  int in = input_dim;
  for (int width : trunk_widths) {
    if (width <= 0) throw std::invalid_argument("network dimensions must be positive");
    params.trunk.push_back(xavier_layer(width, in, rng));
    in = width;
  }
  const int joint = 2 * in;
  params.class_head.push_back(xavier_layer(head_width, joint, rng));
  params.class_head.push_back(xavier_layer(num_classes, head_width, rng));
  params.embed_head.push_back(xavier_layer(head_width, joint, rng));
  params.embed_head.push_back(xavier_layer(embedding_dim, head_width, rng));
  return params;
}

int NetworkParams::trunk_output_dim() const {
  return trunk.empty() ? input_dim : static_cast<int>(trunk.back().weights.rows());
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* section : {&trunk, &class_head, &embed_head}) {
    for (const DenseLayer& layer : *section) {
      n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    }
  }
  return n;
}

void NetworkParams::validate() const {
  auto check_chain = [](const std::vector<DenseLayer>& layers, int in, int out,
                        const char* name) {
    if (layers.empty()) throw std::invalid_argument(std::string(name) + " has no layers");
    for (const DenseLayer& layer : layers) {
      if (layer.weights.cols() != in) {
        throw std::invalid_argument(std::string(name) + " layer input width mismatch");
      }
      if (layer.bias.size() != layer.weights.rows()) {
        throw std::invalid_argument(std::string(name) + " bias size mismatch");
      }
      if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
        throw std::invalid_argument(std::string(name) + " has non-finite parameters");
      }
      in = static_cast<int>(layer.weights.rows());
    }
    if (in != out) throw std::invalid_argument(std::string(name) + " output width mismatch");
  };
  check_chain(trunk, input_dim, trunk_output_dim(), "trunk");
  check_chain(class_head, 2 * trunk_output_dim(), num_classes, "class head");
  check_chain(embed_head, 2 * trunk_output_dim(), embedding_dim, "embedding head");
}

void PredictionField::validate() const {
  if (probs.rows() != embeddings.rows()) {
    throw std::invalid_argument("probability and embedding row counts differ");
  }
  if (!probs.allFinite() || !embeddings.allFinite()) {
    throw std::invalid_argument("non-finite prediction values");
  }
  if ((probs.array() < -1e-12).any()) {
    throw std::invalid_argument("negative class probability");
  }
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    if (std::abs(probs.row(r).sum() - 1.0) > 1e-6) {
      throw std::invalid_argument("class probabilities of point " + std::to_string(r) +
                                  " do not sum to one");
    }
  }
}

PredictionField forward(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  ForwardCache cache = forward_cached(params, inputs);
  return {std::move(cache.probs), std::move(cache.embeddings)};
}

double cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& semantic) {
  if (static_cast<Eigen::Index>(semantic.size()) != probs.rows()) {
    throw std::invalid_argument("one semantic label per row required");
  }
  double total = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const int s = semantic[static_cast<std::size_t>(r)];
    if (s < 0 || s >= probs.cols()) {
      throw std::invalid_argument("semantic label outside class range");
    }
    total -= std::log(std::max(probs(r, s), 1e-300));
  }
  return total / static_cast<double>(probs.rows());
}

double total_loss(const PredictionField& field, const std::vector<int>& semantic,
                  const std::vector<int>& instance, const EmbeddingLossConfig& loss_config) {
  const InstancePartition partition =
      InstancePartition::from_assignment(field.embeddings, instance);
  return cross_entropy(field.probs, semantic) +
         embedding_loss(field.embeddings, partition, loss_config);
}

std::pair<double, NetworkParams> backward(const NetworkParams& params,
                                          const Eigen::MatrixXd& inputs,
                                          const std::vector<int>& semantic,
                                          const std::vector<int>& instance,
                                          const EmbeddingLossConfig& loss_config) {
  ForwardCache cache = forward_cached(params, inputs);
  const Eigen::Index n = inputs.rows();
  if (static_cast<Eigen::Index>(semantic.size()) != n ||
      static_cast<Eigen::Index>(instance.size()) != n) {
    throw std::invalid_argument("one label pair per input row required");
  }

  const double ce = cross_entropy(cache.probs, semantic);
  const InstancePartition partition =
      InstancePartition::from_assignment(cache.embeddings, instance);
  auto [emb_loss, demb] = embedding_loss_with_grad(cache.embeddings, partition, loss_config);
  const double loss = ce + emb_loss;

  // Softmax + cross-entropy collapse to (p - y) / n at the logits.
  Eigen::MatrixXd dlogits = cache.probs;
  for (Eigen::Index r = 0; r < n; ++r) {
    dlogits(r, semantic[static_cast<std::size_t>(r)]) -= 1.0;
  }
  dlogits /= static_cast<double>(n);

  NetworkParams grads;
  grads.input_dim = params.input_dim;
  grads.num_classes = params.num_classes;
  grads.embedding_dim = params.embedding_dim;
  Eigen::MatrixXd djoint =
      head_backward(params.class_head, cache.class_acts, std::move(dlogits), grads.class_head);
  djoint += head_backward(params.embed_head, cache.embed_acts, std::move(demb), grads.embed_head);

  // Split the joint gradient: the pointwise half flows straight back, the
  // context half is summed over points and routed to the max-pool winners.
  const Eigen::Index dim = params.trunk_output_dim();
  Eigen::MatrixXd dlocal = djoint.leftCols(dim);
  const Eigen::RowVectorXd dcontext = djoint.rightCols(dim).colwise().sum();
  for (Eigen::Index c = 0; c < dim; ++c) {
    dlocal(cache.pool_rows[static_cast<std::size_t>(c)], c) += dcontext[c];
  }

  grads.trunk.resize(params.trunk.size());
  Eigen::MatrixXd delta = std::move(dlocal);
  for (std::size_t l = params.trunk.size(); l-- > 0;) {
    delta = delta.cwiseProduct((cache.trunk[l + 1].array() > 0.0).cast<double>().matrix());
    grads.trunk[l].weights = delta.transpose() * cache.trunk[l];
    grads.trunk[l].bias = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * params.trunk[l].weights;
  }
  return {loss, std::move(grads)};
}

double scheduled_learning_rate(const TrainConfig& config, int epoch) {
  if (epoch < 0 || config.decay_every <= 0) {
    throw std::invalid_argument("bad training schedule");
  }
  return config.learning_rate * std::pow(config.decay_factor, epoch / config.decay_every);
}

TrainResult train_network(const std::vector<TrainSample>& samples, NetworkParams params,
                          const TrainConfig& config, const EmbeddingLossConfig& loss_config,
                          const std::function<void(int, double)>& progress) {
  if (samples.empty()) throw std::invalid_argument("no training samples");
  if (config.epochs < 0 || config.decay_every <= 0 || config.learning_rate <= 0.0 ||
      config.batch_size <= 0) {
    throw std::invalid_argument("bad training schedule");
  }
  params.validate();
  loss_config.warn_if_unusual();

  TrainResult result;
  result.epoch_loss.reserve(static_cast<std::size_t>(config.epochs));
  Rng rng(config.seed ^ 0x7ab1e5eedULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = scheduled_learning_rate(config, epoch);
    Rng epoch_rng = rng.fork(static_cast<std::uint64_t>(epoch));
    epoch_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      NetworkParams batch_grads;
      for (std::size_t b = begin; b < end; ++b) {
        const TrainSample& sample = samples[order[b]];
        auto [loss, grads] = backward(params, sample.inputs, sample.semantic, sample.instance,
                                      loss_config);
        epoch_loss += loss;
        if (b == begin) {
          batch_grads = std::move(grads);
        } else {
          auto add = [](std::vector<DenseLayer>& acc, const std::vector<DenseLayer>& g) {
            for (std::size_t l = 0; l < acc.size(); ++l) {
              acc[l].weights += g[l].weights;
              acc[l].bias += g[l].bias;
            }
          };
          add(batch_grads.trunk, grads.trunk);
          add(batch_grads.class_head, grads.class_head);
          add(batch_grads.embed_head, grads.embed_head);
        }
      }
      const double step = lr / static_cast<double>(end - begin);
      auto apply = [step](std::vector<DenseLayer>& layers, const std::vector<DenseLayer>& g) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
          layers[l].weights -= step * g[l].weights;
          layers[l].bias -= step * g[l].bias;
        }
      };
      apply(params.trunk, batch_grads.trunk);
      apply(params.class_head, batch_grads.class_head);
      apply(params.embed_head, batch_grads.embed_head);
    }
    epoch_loss /= static_cast<double>(samples.size());
    result.epoch_loss.push_back(epoch_loss);
    if (progress) progress(epoch, epoch_loss);
  }
  result.params = std::move(params);
  return result;
}

void save_network(const std::string& path, const NetworkParams& params) {
  params.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(kModelMagic, sizeof(kModelMagic));
  write_i32(out, kModelVersion);
  write_i32(out, params.input_dim);
  write_i32(out, params.num_classes);
  write_i32(out, params.embedding_dim);
  write_layer_shapes(out, params.trunk);
  write_layer_shapes(out, params.class_head);
  write_layer_shapes(out, params.embed_head);
  write_layer_payload(out, params.trunk);
  write_layer_payload(out, params.class_head);
  write_layer_payload(out, params.embed_head);
  if (!out) throw IoError("write to '" + path + "' failed");
}

NetworkParams load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();

  if (data.size() < sizeof(kModelMagic) ||
      std::memcmp(data.data(), kModelMagic, sizeof(kModelMagic)) != 0) {
    throw IoError("not a model file (bad magic)");
  }
  std::size_t pos = sizeof(kModelMagic);
  const std::int32_t version = read_i32(data, pos);
  if (version != kModelVersion) {
    throw IoError("unsupported model version " + std::to_string(version));
  }
  NetworkParams params;
  params.input_dim = read_i32(data, pos);
  params.num_classes = read_i32(data, pos);
  params.embedding_dim = read_i32(data, pos);
  params.trunk = read_layer_shapes(data, pos);
  params.class_head = read_layer_shapes(data, pos);
  params.embed_head = read_layer_shapes(data, pos);
  read_layer_payload(data, pos, params.trunk);
  read_layer_payload(data, pos, params.class_head);
  read_layer_payload(data, pos, params.embed_head);
  if (pos != data.size()) {
    throw IoError("trailing bytes after model payload at byte " + std::to_string(pos));
  }
  params.validate();
  return params;
}

void export_predictions(const std::string& path, const PredictionField& field) {
  field.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "pcseg-predictions 1\n";
  out << field.probs.rows() << " " << field.probs.cols() << " " << field.embeddings.cols()
      << "\n";
  char buf[32];
  for (Eigen::Index r = 0; r < field.probs.rows(); ++r) {
    for (Eigen::Index c = 0; c < field.probs.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", field.probs(r, c));
      out << (c == 0 ? "" : " ") << buf;
    }
    for (Eigen::Index c = 0; c < field.embeddings.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", field.embeddings(r, c));
      out << " " << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

PredictionField import_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string header;
  if (!std::getline(in, header) || header.find("pcseg-predictions 1") != 0) {
    throw IoError("line 1: expected 'pcseg-predictions 1' header");
  }
  Eigen::Index n = 0, classes = 0, dim = 0;
  in >> n >> classes >> dim;
  if (!in || n <= 0 || classes <= 0 || dim <= 0) {
    throw IoError("line 2: expected positive point, class, and embedding counts");
  }
  PredictionField field;
  field.probs.resize(n, classes);
  field.embeddings.resize(n, dim);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < classes; ++c) {
      if (!(in >> field.probs(r, c))) {
        throw IoError("line " + std::to_string(r + 3) + ": truncated probability row");
      }
    }
    for (Eigen::Index c = 0; c < dim; ++c) {
      if (!(in >> field.embeddings(r, c))) {
        throw IoError("line " + std::to_string(r + 3) + ": truncated embedding row");
      }
    }
    const double sum = field.probs.row(r).sum();
    if (std::abs(sum - 1.0) > 1e-4) {
      throw IoError("line " + std::to_string(r + 3) + ": probabilities sum to " +
                    std::to_string(sum) + ", expected 1");
    }
    field.probs.row(r) /= sum;
  }
  double extra;
  if (in >> extra) throw IoError("trailing values after the declared rows");
  field.validate();
  return field;
}

}  // namespace pcseg
