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

#include <map>
#include <string>
#include <vector>

namespace pcseg {

struct SemanticMetrics {
  std::map<int, double> per_class_accuracy;  // classes present in ground truth
  double micro_mean = 0.0;                   // total correct / total points
};

SemanticMetrics semantic_metrics(const std::vector<int>& predicted,
                                 const std::vector<int>& ground_truth, int num_classes);

/// A detected or ground-truth instance as a point index set. Confidence is
/// ignored on the ground-truth side.
struct EvalInstance {
  int semantic = 0;
  double confidence = 0.0;
  std::vector<int> points;
};

struct ApReport {
  std::map<int, double> per_class_ap;  // classes with at least one gt instance
  double mean_ap = 0.0;
};

/// Average precision at a point-set IoU threshold. Per class, detections are
/// taken by descending confidence; each matches at most one unmatched gt
/// instance (best IoU, must exceed the threshold). The precision-recall
/// area uses all-points interpolation. Classes without ground truth are
/// excluded from the mean.
ApReport instance_ap(const std::vector<EvalInstance>& detections,
                     const std::vector<EvalInstance>& ground_truth,
                     double iou_threshold = 0.5);

struct EvalReport {
  SemanticMetrics semantic;
  ApReport instances;
};

/// One metric per line: `accuracy.<class> v`, `micro_mean_accuracy v`,
/// `ap.<class> v`, `map_05 v`. Class indices resolve through `class_names`
/// when long enough, else print as `class<i>`.
std::string format_eval_report(const EvalReport& report,
                               const std::vector<std::string>& class_names);

/// The same data as a JSON document.
std::string eval_report_json(const EvalReport& report,
                             const std::vector<std::string>& class_names);

}  // namespace pcseg
