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

#include "pcseg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "pcseg/merge.hpp"

namespace pcseg {

SemanticMetrics semantic_metrics(const std::vector<int>& predicted,
                                 const std::vector<int>& ground_truth, int num_classes) {
  if (predicted.size() != ground_truth.size()) {
    throw std::invalid_argument("semantic_metrics: label vectors differ in length");
  }
  if (ground_truth.empty()) {
    throw std::invalid_argument("semantic_metrics: nothing to evaluate");
  }
  std::vector<long> total(static_cast<std::size_t>(num_classes), 0);
  std::vector<long> correct(static_cast<std::size_t>(num_classes), 0);
  long hits = 0;
  for (std::size_t j = 0; j < ground_truth.size(); ++j) {
    const int g = ground_truth[j];
    if (g < 0 || g >= num_classes) {
      throw std::invalid_argument("semantic_metrics: ground-truth label out of range");
    }
    if (predicted[j] < 0 || predicted[j] >= num_classes) {
      throw std::invalid_argument("semantic_metrics: predicted label out of range");
    }
    ++total[static_cast<std::size_t>(g)];
    if (predicted[j] == g) {
      ++correct[static_cast<std::size_t>(g)];
      ++hits;
    }
  }
  SemanticMetrics out;
  for (int c = 0; c < num_classes; ++c) {
    if (total[static_cast<std::size_t>(c)] == 0) continue;
    out.per_class_accuracy[c] = static_cast<double>(correct[static_cast<std::size_t>(c)]) /
                                static_cast<double>(total[static_cast<std::size_t>(c)]);
  }
  out.micro_mean = static_cast<double>(hits) / static_cast<double>(ground_truth.size());
  return out;
}

namespace {

double all_points_ap(const std::vector<bool>& is_tp, std::size_t gt_count) {
  // Precision-recall area with precision taken as the running maximum from
  // the right, summed over recall increments.
  double ap = 0.0;
  double best_precision = 0.0;
  long tp = static_cast<long>(std::count(is_tp.begin(), is_tp.end(), true));
  long seen = static_cast<long>(is_tp.size());
  for (std::size_t r = is_tp.size(); r-- > 0;) {
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    best_precision = std::max(best_precision, precision);
    if (is_tp[r]) {
      // Recall steps by 1/gt_count at each true positive.
      ap += best_precision / static_cast<double>(gt_count);
      --tp;
    }
    --seen;
  }
  return ap;
}

}  // namespace

ApReport instance_ap(const std::vector<EvalInstance>& detections,
                     const std::vector<EvalInstance>& ground_truth, double iou_threshold) {
  ApReport out;
  std::map<int, std::vector<std::size_t>> gt_by_class;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    gt_by_class[ground_truth[i].semantic].push_back(i);
  }
  for (const auto& [cls, gt_indices] : gt_by_class) {
    std::vector<std::size_t> det_indices;
    for (std::size_t i = 0; i < detections.size(); ++i) {
      if (detections[i].semantic == cls) det_indices.push_back(i);
    }
    std::stable_sort(det_indices.begin(), det_indices.end(), [&](std::size_t a, std::size_t b) {
      return detections[a].confidence > detections[b].confidence;
    });

    std::vector<bool> matched(gt_indices.size(), false);
    std::vector<bool> is_tp(det_indices.size(), false);
    for (std::size_t d = 0; d < det_indices.size(); ++d) {
      double best_iou = 0.0;
      std::size_t best_g = gt_indices.size();
      for (std::size_t g = 0; g < gt_indices.size(); ++g) {
        if (matched[g]) continue;
        const double iou =
            point_set_iou(detections[det_indices[d]].points, ground_truth[gt_indices[g]].points);
        if (iou > best_iou) {
          best_iou = iou;
          best_g = g;
        }
      }
      if (best_g < gt_indices.size() && best_iou > iou_threshold) {
        matched[best_g] = true;
        is_tp[d] = true;
      }
    }
    out.per_class_ap[cls] = det_indices.empty() ? 0.0 : all_points_ap(is_tp, gt_indices.size());
  }
  if (!out.per_class_ap.empty()) {
    double sum = 0.0;
    for (const auto& [cls, ap] : out.per_class_ap) sum += ap;
    out.mean_ap = sum / static_cast<double>(out.per_class_ap.size());
  }
  return out;
}

namespace {

std::string class_label(int index, const std::vector<std::string>& class_names) {
  if (index >= 0 && static_cast<std::size_t>(index) < class_names.size()) {
    return class_names[static_cast<std::size_t>(index)];
  }
  return "class" + std::to_string(index);
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string format_eval_report(const EvalReport& report,
                               const std::vector<std::string>& class_names) {
  std::string out;
  for (const auto& [cls, acc] : report.semantic.per_class_accuracy) {
    out += "accuracy." + class_label(cls, class_names) + " " + format_value(acc) + "\n";
  }
  out += "micro_mean_accuracy " + format_value(report.semantic.micro_mean) + "\n";
  for (const auto& [cls, ap] : report.instances.per_class_ap) {
    out += "ap." + class_label(cls, class_names) + " " + format_value(ap) + "\n";
  }
  out += "map_05 " + format_value(report.instances.mean_ap) + "\n";
  return out;
}

std::string eval_report_json(const EvalReport& report,
                             const std::vector<std::string>& class_names) {
  nlohmann::json doc;
  nlohmann::json acc = nlohmann::json::object();
  for (const auto& [cls, v] : report.semantic.per_class_accuracy) {
    acc[class_label(cls, class_names)] = v;
  }
  doc["accuracy"] = std::move(acc);
  doc["micro_mean_accuracy"] = report.semantic.micro_mean;
  nlohmann::json ap = nlohmann::json::object();
  for (const auto& [cls, v] : report.instances.per_class_ap) {
    ap[class_label(cls, class_names)] = v;
  }
  doc["ap"] = std::move(ap);
  doc["map_05"] = report.instances.mean_ap;
  return doc.dump(2) + "\n";
}

}  // namespace pcseg
