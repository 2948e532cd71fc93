// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// Detection and proposal metrics: recall at an IoU threshold, average recall
// over a threshold grid, the AR-AN curve and its area, and mAP.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gtan/data.hpp"
#include "gtan/inference.hpp"

namespace gtan::metrics {

using inference::Detection;
using inference::DetectionMap;
using GroundTruthMap = std::map<std::string, std::vector<data::GroundTruthInstance>>;

GroundTruthMap ground_truth_of(const data::Dataset& dataset);

struct EvalConfig {
  std::vector<double> iou_grid = activitynet_grid();
  std::size_t an_cap = 100;
  // mAP ignores class labels when set; recall is always class-agnostic.
  bool class_agnostic = false;
  std::vector<double> map_thresholds = {0.5, 0.6, 0.7, 0.8, 0.9};
  // GTs at least this wide form the long-action subset.
  double long_width = 0.35;

  static std::vector<double> thumos_grid();       // 0.5:0.05:1.0
  static std::vector<double> activitynet_grid();  // 0.5:0.05:0.95
  void validate() const;
};

struct RecallResult {
  double recall = 0.0;
  bool empty_ground_truth = false;  // recall reported as 1
};

// Greedy one-to-one matching per video, highest-scoring detection first
// (earlier index on ties); each detection takes the unmatched GT with the
// highest IoU (earlier GT on ties) if that IoU >= threshold. Only the
// `an_cap` best detections of each video take part.
RecallResult recall_at(const DetectionMap& detections, const GroundTruthMap& gts,
                       double iou_threshold, std::size_t an_cap);

struct RecallSummary {
  double average_recall = 0.0;  // mean recall over the grid at the cap
  double auc = 0.0;             // trapezoid under AR-AN divided by (cap - 1)
  std::vector<double> recall_per_threshold;
  std::vector<double> ar_an;  // entry n-1 is AR with n detections per video
  bool empty_ground_truth = false;
};

RecallSummary average_recall(const DetectionMap& detections, const GroundTruthMap& gts,
                             const EvalConfig& config);

// All-point interpolated AP of one class (every class when class_id < 0).
// GTs failing `include` are neither counted nor penalized: detections that
// match them are dropped from the sweep.
double average_precision(const DetectionMap& detections, const GroundTruthMap& gts,
                         int class_id, double iou_threshold,
                         double min_gt_width = 0.0);

struct MapResult {
  double map = 0.0;
  std::vector<double> per_class;  // NaN for classes without GTs
  std::size_t classes_with_gt = 0;
};

MapResult map_at(const DetectionMap& detections, const GroundTruthMap& gts, int num_classes,
                 double iou_threshold, bool class_agnostic = false, double min_gt_width = 0.0);

struct EvalReport {
  std::vector<double> map_thresholds;
  std::vector<double> map;       // per threshold
  double average_map = 0.0;
  std::vector<double> long_map;  // per threshold, long-action subset
  double average_long_map = 0.0;
  double average_recall = 0.0;
  double auc = 0.0;
  std::vector<std::pair<double, double>> recall_iou;  // (threshold, recall)
  std::vector<double> ar_an;
  bool empty_ground_truth = false;
};

EvalReport evaluate(const DetectionMap& detections, const GroundTruthMap& gts, int num_classes,
                    const EvalConfig& config);

std::string report_to_json(const EvalReport& report);
// Long-form CSV: curve,x,value.
std::string curves_to_csv(const EvalReport& report);

}  // namespace gtan::metrics
