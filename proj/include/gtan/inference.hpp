// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// Ranking scores, refined-segment emission and soft-NMS.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gtan/network.hpp"

namespace gtan::inference {

// Smallest emitted width on the normalized axis.
inline constexpr double kMinDetectionWidth = 1e-4;

struct Detection {
  std::string video_id;
  double center = 0.0;
  double width = 0.0;
  int class_id = 0;
  double score = 0.0;

  gaussian::Segment segment() const {
    return gaussian::Segment::from_center_width(center, width);
  }
};

std::vector<double> softmax(std::span<const double> logits);

// y_f = max(softmax) * y_ov; background-argmax proposals are dropped. The
// refined segment is clamped to [0, 1] with width >= kMinDetectionWidth.
std::vector<Detection> score_and_emit(std::span<const network::Proposal> proposals,
                                      const std::string& video_id, double alpha1,
                                      double alpha2);

struct SoftNmsConfig {
  double decay = 0.8;      // xi
  double threshold = 0.75;  // rho
};

// Iterative soft-NMS within each (video, class); returns the instances in
// their input order with updated scores.
std::vector<Detection> soft_nms(std::vector<Detection> detections, const SoftNmsConfig& config);

// The k highest scores, stable under ties.
std::vector<Detection> top_k(std::vector<Detection> detections, std::size_t k);

struct InferenceConfig {
  SoftNmsConfig nms;
  std::size_t max_detections = 200;  // per video, after soft-NMS
};

// Full prediction for one video.
std::vector<Detection> predict(const network::Network& net, const network::ParameterStore& params,
                               const data::VideoRecord& video, const InferenceConfig& config);

using DetectionMap = std::map<std::string, std::vector<Detection>>;

std::string detections_to_json(const DetectionMap& detections);
DetectionMap detections_from_json(const std::string& text);

}  // namespace gtan::inference
