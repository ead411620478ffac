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

#include <cstdint>
#include <string>
#include <vector>

#include "pcseg/crf.hpp"
#include "pcseg/embedding_loss.hpp"
#include "pcseg/meanshift.hpp"
#include "pcseg/merge.hpp"
#include "pcseg/net.hpp"
#include "pcseg/synth.hpp"
#include "pcseg/windows.hpp"

namespace pcseg {

struct NetworkConfig {
  int embedding_dim = 8;
  std::vector<int> trunk_widths = {32, 64, 128};
  int head_width = 64;
};

/// Everything a run needs beyond its input paths. One JSON file, flags
/// override individual fields, no other configuration channels.
struct RunConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  bool dump_intermediate = false;
  int num_scenes = 10;
  double train_fraction = 0.8;
  double nms_iou = 0.5;
  SynthConfig synth;
  WindowingConfig windows;
  NetworkConfig network;
  EmbeddingLossConfig loss;
  TrainConfig train;
  MeanShiftConfig meanshift;
  CrfConfig crf;
  BlockMergeConfig merge;

  void validate() const;  // throws std::invalid_argument naming the field
};

/// Parses a JSON config file. Unknown or mistyped keys raise IoError naming
/// the dotted key path. Missing keys keep their defaults.
RunConfig load_run_config(const std::string& path);

/// Applies a parsed JSON document onto `config` (same key rules as above).
void apply_config_json(RunConfig& config, const std::string& text, const std::string& origin);

/// The full configuration as a JSON document; reloading it reproduces the
/// config exactly.
std::string run_config_json(const RunConfig& config);

CrfMode parse_crf_mode(const std::string& name);  // unary | pairwise | full
std::string crf_mode_name(CrfMode mode);

}  // namespace pcseg
