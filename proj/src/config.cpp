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

#include "pcseg/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "pcseg/io_error.hpp"

namespace pcseg {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& key,
                       const std::string& what) {
  throw IoError(origin + ": " + what + " at key \"" + key + "\"");
}

double as_double(const json& v, const std::string& origin, const std::string& key) {
  if (!v.is_number()) fail(origin, key, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& origin, const std::string& key) {
  if (!v.is_number_integer()) fail(origin, key, "expected an integer");
  return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& origin, const std::string& key) {
  if (!v.is_number_unsigned() && !v.is_number_integer()) fail(origin, key, "expected an integer");
  if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
    fail(origin, key, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& origin, const std::string& key) {
  if (!v.is_boolean()) fail(origin, key, "expected a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& origin, const std::string& key) {
  if (!v.is_string()) fail(origin, key, "expected a string");
  return v.get<std::string>();
}

void read_synth(const json& obj, const std::string& origin, SynthConfig& out) {
  for (const auto& [key, v] : obj.items()) {
    const std::string path = "synth." + key;
    if (key == "class_names") {
      if (!v.is_array() || v.empty()) fail(origin, path, "expected a non-empty string array");
      out.class_names.clear();
      for (const auto& name : v) out.class_names.push_back(as_string(name, origin, path));
    } else if (key == "scene_extent") {
      out.scene_extent = as_double(v, origin, path);
    } else if (key == "min_objects") {
      out.min_objects = as_int(v, origin, path);
    } else if (key == "max_objects") {
      out.max_objects = as_int(v, origin, path);
    } else if (key == "min_object_extent") {
      out.min_object_extent = as_double(v, origin, path);
    } else if (key == "max_object_extent") {
      out.max_object_extent = as_double(v, origin, path);
    } else if (key == "min_separation") {
      out.min_separation = as_double(v, origin, path);
    } else if (key == "density") {
      out.density = as_double(v, origin, path);
    } else if (key == "color_noise") {
      out.color_noise = as_double(v, origin, path);
    } else if (key == "position_noise") {
      out.position_noise = as_double(v, origin, path);
    } else if (key == "with_normals") {
      out.with_normals = as_bool(v, origin, path);
    } else {
      fail(origin, path, "unknown key");
    }
  }
}

void read_windows(const json& obj, const std::string& origin, WindowingConfig& out) {
  for (const auto& [key, v] : obj.items()) {
    const std::string path = "windows." + key;
    if (key == "window") {
      out.window = as_double(v, origin, path);
    } else if (key == "stride") {
      out.stride = as_double(v, origin, path);
    } else if (key == "point_count") {
      out.point_count = as_int(v, origin, path);
    } else {
      fail(origin, path, "unknown key");
    }
  }
}

void read_network(const json& obj, const std::string& origin, NetworkConfig& out) {
  for (const auto& [key, v] : obj.items()) {
    const std::string path = "network." + key;
    if (key == "embedding_dim") {
      out.embedding_dim = as_int(v, origin, path);
    } else if (key == "trunk_widths") {
      if (!v.is_array() || v.empty()) fail(origin, path, "expected a non-empty integer array");
      out.trunk_widths.clear();
      for (const auto& w : v) out.trunk_widths.push_back(as_int(w, origin, path));
    } else if (key == "head_width") {
      out.head_width = as_int(v, origin, path);
    } else {
      fail(origin, path, "unknown key");
    }
  }
}

void read_loss(const json& obj, const std::string& origin, EmbeddingLossConfig& out) {
  for (const auto& [key, v] : obj.items()) {
    const std::string path = "loss." + key;
    if (key == "alpha") {
      out.alpha = as_double(v, origin, path);
    } else if (key == "beta") {
      out.beta = as_double(v, origin, path);
    } else if (key == "gamma") {
      out.gamma = as_double(v, origin, path);
    } else if (key == "delta_pull") {
      out.delta_pull = as_double(v, origin, path);
    } else if (key == "delta_push") {
      out.delta_push = as_double(v, origin, path);
    } else {
      fail(origin, path, "unknown key");
    }
  }
}

void read_train(const json& obj, const std::string& origin, TrainConfig& out) {
  for (const auto& [key, v] : obj.items()) {
    const std::string path = "train." + key;
    if (key == "learning_rate") {
      out.learning_rate = as_double(v, origin, path);
    } else if (key == "decay_factor") {
      out.decay_factor = as_double(v, origin, path);
    } else if (key == "decay_every") {
      out.decay_every = as_int(v, origin, path);
    } else if (key == "epochs") {
      out.epochs = as_int(v, origin, path);
    } else if (key == "batch_size") {
      out.batch_size = as_int(v, origin, path);
    } else {
      fail(origin, path, "unknown key");
    }
  }
}

void read_meanshift(const json& obj, const std::string& origin, MeanShiftConfig& out) {
  for (const auto& [key, v] : obj.items()) {
    const std::string path = "meanshift." + key;
    if (key == "bandwidth") {
      out.bandwidth = as_double(v, origin, path);
    } else if (key == "tolerance") {
      out.tolerance = as_double(v, origin, path);
    } else if (key == "max_iterations") {
      out.max_iterations = as_int(v, origin, path);
    } else if (key == "bin_seeds") {
      out.bin_seeds = as_bool(v, origin, path);
    } else if (key == "bin_size") {
      out.bin_size = as_double(v, origin, path);
    } else {
      fail(origin, path, "unknown key");
    }
  }
}

void read_crf(const json& obj, const std::string& origin, CrfConfig& out) {
  for (const auto& [key, v] : obj.items()) {
    const std::string path = "crf." + key;
    if (key == "theta") {
      out.theta = as_double(v, origin, path);
    } else if (key == "lambda1") {
      out.lambda1 = as_double(v, origin, path);
    } else if (key == "lambda2") {
      out.lambda2 = as_double(v, origin, path);
    } else if (key == "lambda3") {
      out.lambda3 = as_double(v, origin, path);
    } else if (key == "mf_iters") {
      out.mf_iters = as_int(v, origin, path);
    } else if (key == "mf_tol") {
      out.mf_tol = as_double(v, origin, path);
    } else if (key == "cov_epsilon") {
      out.cov_epsilon = as_double(v, origin, path);
    } else if (key == "cov_scale") {
      out.cov_scale = as_double(v, origin, path);
    } else if (key == "prob_floor") {
      out.prob_floor = as_double(v, origin, path);
    } else if (key == "use_normals") {
      out.use_normals = as_bool(v, origin, path);
    } else if (key == "approx_messages") {
      out.approx_messages = as_bool(v, origin, path);
    } else if (key == "approx_cell") {
      out.approx_cell = as_double(v, origin, path);
    } else if (key == "approx_bins") {
      out.approx_bins = as_int(v, origin, path);
    } else {
      fail(origin, path, "unknown key");
    }
  }
}

void read_merge(const json& obj, const std::string& origin, BlockMergeConfig& out) {
  for (const auto& [key, v] : obj.items()) {
    const std::string path = "merge." + key;
    if (key == "voxel_size") {
      out.voxel_size = as_double(v, origin, path);
    } else if (key == "overlap_ratio") {
      out.overlap_ratio = as_double(v, origin, path);
    } else {
      fail(origin, path, "unknown key");
    }
  }
}

void require_object(const json& v, const std::string& origin, const std::string& key) {
  if (!v.is_object()) fail(origin, key, "expected an object");
}

}  // namespace

void RunConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& what) {
    throw std::invalid_argument("config field " + field + " " + what);
  };
  if (jobs < 1) bad("jobs", "must be at least 1");
  if (num_scenes < 1) bad("num_scenes", "must be at least 1");
  if (train_fraction < 0.0 || train_fraction > 1.0) bad("train_fraction", "must lie in [0, 1]");
  if (!(nms_iou >= 0.0) || nms_iou >= 1.0) bad("nms_iou", "must lie in [0, 1)");
  if (synth.class_names.empty()) bad("synth.class_names", "must not be empty");
  if (windows.window <= 0.0) bad("windows.window", "must be positive");
  if (windows.stride <= 0.0) bad("windows.stride", "must be positive");
  if (windows.point_count < 1) bad("windows.point_count", "must be at least 1");
  if (network.embedding_dim < 1) bad("network.embedding_dim", "must be at least 1");
  if (network.trunk_widths.empty()) bad("network.trunk_widths", "must not be empty");
  for (int w : network.trunk_widths) {
    if (w < 1) bad("network.trunk_widths", "entries must be at least 1");
  }
  if (network.head_width < 1) bad("network.head_width", "must be at least 1");
  if (train.learning_rate <= 0.0) bad("train.learning_rate", "must be positive");
  if (train.decay_factor <= 0.0 || train.decay_factor > 1.0) {
    bad("train.decay_factor", "must lie in (0, 1]");
  }
  if (train.decay_every < 1) bad("train.decay_every", "must be at least 1");
  if (train.epochs < 0) bad("train.epochs", "must be non-negative");
  if (train.batch_size < 1) bad("train.batch_size", "must be at least 1");
  if (meanshift.bandwidth <= 0.0) bad("meanshift.bandwidth", "must be positive");
  if (meanshift.tolerance <= 0.0) bad("meanshift.tolerance", "must be positive");
  if (meanshift.max_iterations < 1) bad("meanshift.max_iterations", "must be at least 1");
  if (merge.voxel_size <= 0.0) bad("merge.voxel_size", "must be positive");
  if (merge.overlap_ratio < 0.0 || merge.overlap_ratio > 1.0) {
    bad("merge.overlap_ratio", "must lie in [0, 1]");
  }
  crf.validate();
  loss.warn_if_unusual();
}

void apply_config_json(RunConfig& config, const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(origin + ": " + e.what());
  }
  if (!doc.is_object()) throw IoError(origin + ": top level must be an object");
  for (const auto& [key, v] : doc.items()) {
    if (key == "seed") {
      config.seed = as_u64(v, origin, key);
    } else if (key == "jobs") {
      config.jobs = as_int(v, origin, key);
    } else if (key == "dump_intermediate") {
      config.dump_intermediate = as_bool(v, origin, key);
    } else if (key == "ablation") {
      config.crf.mode = parse_crf_mode(as_string(v, origin, key));
    } else if (key == "num_scenes") {
      config.num_scenes = as_int(v, origin, key);
    } else if (key == "train_fraction") {
      config.train_fraction = as_double(v, origin, key);
    } else if (key == "nms_iou") {
      config.nms_iou = as_double(v, origin, key);
    } else if (key == "synth") {
      require_object(v, origin, key);
      read_synth(v, origin, config.synth);
    } else if (key == "windows") {
      require_object(v, origin, key);
      read_windows(v, origin, config.windows);
    } else if (key == "network") {
      require_object(v, origin, key);
      read_network(v, origin, config.network);
    } else if (key == "loss") {
      require_object(v, origin, key);
      read_loss(v, origin, config.loss);
    } else if (key == "train") {
      require_object(v, origin, key);
      read_train(v, origin, config.train);
    } else if (key == "meanshift") {
      require_object(v, origin, key);
      read_meanshift(v, origin, config.meanshift);
    } else if (key == "crf") {
      require_object(v, origin, key);
      read_crf(v, origin, config.crf);
    } else if (key == "merge") {
      require_object(v, origin, key);
      read_merge(v, origin, config.merge);
    } else {
      fail(origin, key, "unknown key");
    }
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  RunConfig config;
  apply_config_json(config, text.str(), path);
  return config;
}

std::string run_config_json(const RunConfig& config) {
  json doc;
  doc["seed"] = config.seed;
  doc["jobs"] = config.jobs;
  doc["dump_intermediate"] = config.dump_intermediate;
  doc["ablation"] = crf_mode_name(config.crf.mode);
  doc["num_scenes"] = config.num_scenes;
  doc["train_fraction"] = config.train_fraction;
  doc["nms_iou"] = config.nms_iou;
  doc["synth"] = {{"class_names", config.synth.class_names},
                  {"scene_extent", config.synth.scene_extent},
                  {"min_objects", config.synth.min_objects},
                  {"max_objects", config.synth.max_objects},
                  {"min_object_extent", config.synth.min_object_extent},
                  {"max_object_extent", config.synth.max_object_extent},
                  {"min_separation", config.synth.min_separation},
                  {"density", config.synth.density},
                  {"color_noise", config.synth.color_noise},
                  {"position_noise", config.synth.position_noise},
                  {"with_normals", config.synth.with_normals}};
  doc["windows"] = {{"window", config.windows.window},
                    {"stride", config.windows.stride},
                    {"point_count", config.windows.point_count}};
  doc["network"] = {{"embedding_dim", config.network.embedding_dim},
                    {"trunk_widths", config.network.trunk_widths},
                    {"head_width", config.network.head_width}};
  doc["loss"] = {{"alpha", config.loss.alpha},
                 {"beta", config.loss.beta},
                 {"gamma", config.loss.gamma},
                 {"delta_pull", config.loss.delta_pull},
                 {"delta_push", config.loss.delta_push}};
  doc["train"] = {{"learning_rate", config.train.learning_rate},
                  {"decay_factor", config.train.decay_factor},
                  {"decay_every", config.train.decay_every},
                  {"epochs", config.train.epochs},
                  {"batch_size", config.train.batch_size}};
  doc["meanshift"] = {{"bandwidth", config.meanshift.bandwidth},
                      {"tolerance", config.meanshift.tolerance},
                      {"max_iterations", config.meanshift.max_iterations},
                      {"bin_seeds", config.meanshift.bin_seeds},
                      {"bin_size", config.meanshift.bin_size}};
  doc["crf"] = {{"theta", config.crf.theta},
                {"lambda1", config.crf.lambda1},
                {"lambda2", config.crf.lambda2},
                {"lambda3", config.crf.lambda3},
                {"mf_iters", config.crf.mf_iters},
                {"mf_tol", config.crf.mf_tol},
                {"cov_epsilon", config.crf.cov_epsilon},
                {"cov_scale", config.crf.cov_scale},
                {"prob_floor", config.crf.prob_floor},
                {"use_normals", config.crf.use_normals},
                {"approx_messages", config.crf.approx_messages},
                {"approx_cell", config.crf.approx_cell},
                {"approx_bins", config.crf.approx_bins}};
  doc["merge"] = {{"voxel_size", config.merge.voxel_size},
                  {"overlap_ratio", config.merge.overlap_ratio}};
  return doc.dump(2) + "\n";
}

CrfMode parse_crf_mode(const std::string& name) {
  if (name == "unary") return CrfMode::Unary;
  if (name == "pairwise") return CrfMode::Pairwise;
  if (name == "full") return CrfMode::Full;
  throw std::invalid_argument("unknown ablation mode \"" + name +
                              "\" (expected unary, pairwise, or full)");
}

std::string crf_mode_name(CrfMode mode) {
  switch (mode) {
    case CrfMode::Unary:
      return "unary";
    case CrfMode::Pairwise:
      return "pairwise";
    case CrfMode::Full:
      return "full";
  }
  return "full";
}

}  // namespace pcseg
