// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include "gtan/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gtan/errors.hpp"
#include "json.hpp"

namespace gtan::inference {

using json = nlohmann::json;

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (auto& x : p) z += (x = std::exp(x - m));
  for (auto& x : p) x /= z;
  return p;
}

std::vector<Detection> score_and_emit(std::span<const network::Proposal> proposals,
                                      const std::string& video_id, double alpha1,
                                      double alpha2) {
  std::vector<Detection> out;
  for (const auto& p : proposals) {
    const auto probs = softmax(p.class_logits);
    const auto best = static_cast<std::size_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    if (best + 1 == probs.size()) continue;  // background wins
    const auto r = network::refine(p.box, p.delta_c, p.delta_w, alpha1, alpha2);
    double start = std::clamp(r.center - 0.5 * r.width, 0.0, 1.0);
    double end = std::clamp(r.center + 0.5 * r.width, 0.0, 1.0);
    if (!(end - start >= kMinDetectionWidth)) {
      const double half = 0.5 * kMinDetectionWidth;
      const double mid = std::clamp(0.5 * (start + end), half, 1.0 - half);
      start = mid - half;
      end = mid + half;
    }
    Detection d;
    d.video_id = video_id;
    d.center = 0.5 * (start + end);
    d.width = end - start;
    d.class_id = static_cast<int>(best);
    d.score = probs[best] * p.overlap();
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> soft_nms(std::vector<Detection> detections, const SoftNmsConfig& config) {
  if (!(config.decay > 0.0)) throw ValidationError("soft-NMS decay must be positive");
  // Bucket by (video, class), keeping emission order inside each bucket.
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    groups[{detections[i].video_id, detections[i].class_id}].push_back(i);
  }
  for (auto& [key, members] : groups) {
    std::vector<bool> done(members.size(), false);
    for (std::size_t round = 0; round < members.size(); ++round) {
      std::size_t m = members.size();
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < members.size(); ++a) {
        if (!done[a] && detections[members[a]].score > top) {
          top = detections[members[a]].score;
          m = a;
        }
      }
      if (m == members.size()) break;
      done[m] = true;
      const auto seg_m = detections[members[m]].segment();
      for (std::size_t a = 0; a < members.size(); ++a) {
        if (done[a]) continue;
        auto& d = detections[members[a]];
        const double iou = gaussian::segment_iou(d.segment(), seg_m);
        if (iou >= config.threshold) d.score *= std::exp(-iou * iou / config.decay);
      }
    }
  }
  return detections;
}

std::vector<Detection> top_k(std::vector<Detection> detections, std::size_t k) {
  if (k < 1) throw ValidationError("top_k needs k >= 1");
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  if (detections.size() > k) detections.resize(k);
  return detections;
}

std::vector<Detection> predict(const network::Network& net, const network::ParameterStore& params,
                               const data::VideoRecord& video, const InferenceConfig& config) {
  ad::Graph g(ad::Graph::Mode::kInference);
  const auto forward = net.forward(g, params, video);
  auto dets = score_and_emit(forward.proposals, video.id, net.config().alpha1,
                             net.config().alpha2);
  dets = soft_nms(std::move(dets), config.nms);
  return top_k(std::move(dets), config.max_detections);
}

std::string detections_to_json(const DetectionMap& detections) {
  json root = json::object();
  for (const auto& [id, list] : detections) {
    json arr = json::array();
    for (const auto& d : list) {
      arr.push_back({{"center", d.center}, {"width", d.width}, {"class_id", d.class_id},
                     {"score", d.score}});
    }
    root[id] = std::move(arr);
  }
  return root.dump(2) + "\n";
}

DetectionMap detections_from_json(const std::string& text) {
  DetectionMap out;
  try {
    const json root = json::parse(text);
    if (!root.is_object()) throw ValidationError("detections JSON must be an object");
    for (const auto& [id, arr] : root.items()) {
      auto& list = out[id];
      for (const auto& e : arr) {
        Detection d;
        d.video_id = id;
        d.center = e.at("center").get<double>();
        d.width = e.at("width").get<double>();
        d.class_id = e.at("class_id").get<int>();
        d.score = e.at("score").get<double>();
        list.push_back(std::move(d));
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed detections JSON: ") + e.what());
  }
  return out;
}

}  // namespace gtan::inference
