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

#include <string>
#include <vector>

#include "pcseg/cloud.hpp"
#include "pcseg/io_error.hpp"

namespace pcseg {

/// Reads an ASCII or binary little-endian PLY file. Recognized vertex
/// properties: x y z (required), nx ny nz (optional), red green blue
/// (optional; uchar values are scaled by 1/255, float values are taken
/// as-is). Unknown scalar properties are skipped. Class names stored as
/// "comment class <name>" header lines are restored into the cloud.
PointCloud read_ply(const std::string& path);

/// Writes every attribute as float64 so that a write/read pair reproduces
/// the cloud bit-exactly (ASCII uses round-trip-exact formatting).
void write_ply(const std::string& path, const PointCloud& cloud, bool binary);

struct LabelFile {
  std::vector<int> semantic;
  std::vector<int> instance;
};

/// Reads "<semantic_index> <instance_id>" lines, one per point.
LabelFile read_labels(const std::string& path);

void write_labels(const std::string& path, const std::vector<int>& semantic,
                  const std::vector<int>& instance);

/// Copies labels onto the cloud; sizes must match and indices must fit the
/// class table.
void apply_labels(PointCloud& cloud, const LabelFile& labels);

}  // namespace pcseg
