// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include "gtan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "gtan/errors.hpp"
#include "json.hpp"

namespace gtan::metrics {

namespace {

using json = nlohmann::json;

const std::vector<data::GroundTruthInstance> kNoGts;
const std::vector<Detection> kNoDetections;

const std::vector<data::GroundTruthInstance>& gts_of(const GroundTruthMap& gts,
                                                     const std::string& id) {
  auto it = gts.find(id);
  return it == gts.end() ? kNoGts : it->second;
}

// Indices of `dets` by descending score, earlier index first on ties.
std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

// Greedy matching of detections (already in processing order) to GTs.
// Returns the matched GT per detection or -1.
std::vector<int> greedy_match(const std::vector<const Detection*>& dets,
                              const std::vector<const data::GroundTruthInstance*>& gts,
                              double threshold) {
  std::vector<int> match(dets.size(), -1);
  std::vector<bool> used(gts.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto seg = dets[i]->segment();
    double best = -1.0;
    int best_gt = -1;
    for (std::size_t k = 0; k < gts.size(); ++k) {
      if (used[k]) continue;
      const double iou = gaussian::segment_iou(seg, gts[k]->segment());
      if (iou > best) {
        best = iou;
        best_gt = static_cast<int>(k);
      }
    }
    if (best_gt >= 0 && best >= threshold) {
      used[static_cast<std::size_t>(best_gt)] = true;
      match[i] = best_gt;
    }
  }
  return match;
}

std::vector<std::string> video_ids(const DetectionMap& detections, const GroundTruthMap& gts) {
  std::vector<std::string> ids;
  for (const auto& [id, list] : gts) ids.push_back(id);
  for (const auto& [id, list] : detections) {
    if (!gts.contains(id)) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Per threshold, the number of matched GTs among the first n detections of
// every video, for n = 1..cap.
std::vector<std::vector<std::size_t>> matched_prefix_counts(const DetectionMap& detections,
                                                            const GroundTruthMap& gts,
                                                            const std::vector<double>& grid,
                                                            std::size_t cap) {
  std::vector<std::vector<std::size_t>> counts(grid.size(), std::vector<std::size_t>(cap, 0));
  for (const auto& [id, list] : gts) {
    if (list.empty()) continue;
    auto it = detections.find(id);
    const auto& dets = it == detections.end() ? kNoDetections : it->second;
    const auto order = score_order(dets);
    std::vector<const Detection*> ranked;
    for (std::size_t i = 0; i < order.size() && i < cap; ++i) ranked.push_back(&dets[order[i]]);
    std::vector<const data::GroundTruthInstance*> targets;
    for (const auto& gt : list) targets.push_back(&gt);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto match = greedy_match(ranked, targets, grid[g]);
      std::size_t running = 0;
      for (std::size_t n = 0; n < cap; ++n) {
        if (n < match.size() && match[n] >= 0) ++running;
        counts[g][n] += running;
      }
    }
  }
  return counts;
}

std::size_t total_gts(const GroundTruthMap& gts) {
  std::size_t n = 0;
  for (const auto& [id, list] : gts) n += list.size();
  return n;
}

}  // namespace

GroundTruthMap ground_truth_of(const data::Dataset& dataset) {
  GroundTruthMap out;
  for (const auto& v : dataset.videos) out[v.id] = v.annotations;
  return out;
}

std::vector<double> EvalConfig::thumos_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(0.5 + 0.05 * i);
  return g;
}

std::vector<double> EvalConfig::activitynet_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 9; ++i) g.push_back(0.5 + 0.05 * i);
  return g;
}

void EvalConfig::validate() const {
  auto check_grid = [](const std::vector<double>& g, const char* what) {
    if (g.empty()) throw ValidationError(std::string(what) + " must not be empty");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(g[i] >= 0.0 && g[i] <= 1.0)) {
        throw ValidationError(std::string(what) + " values must lie in [0, 1]");
      }
      if (i > 0 && !(g[i] > g[i - 1])) {
        throw ValidationError(std::string(what) + " must be strictly increasing");
      }
    }
  };
  check_grid(iou_grid, "iou_grid");
  check_grid(map_thresholds, "map_thresholds");
  if (an_cap < 1) throw ValidationError("an_cap must be >= 1");
  if (!(long_width >= 0.0 && long_width <= 1.0)) throw ValidationError("long_width must lie in [0, 1]");
}

RecallResult recall_at(const DetectionMap& detections, const GroundTruthMap& gts,
                       double iou_threshold, std::size_t an_cap) {
  if (an_cap < 1) throw ValidationError("an_cap must be >= 1");
  const std::size_t n = total_gts(gts);
  if (n == 0) return {1.0, true};
  const auto counts = matched_prefix_counts(detections, gts, {iou_threshold}, an_cap);
  return {static_cast<double>(counts[0].back()) / static_cast<double>(n), false};
}

RecallSummary average_recall(const DetectionMap& detections, const GroundTruthMap& gts,
                             const EvalConfig& config) {
  config.validate();
  RecallSummary s;
  const std::size_t cap = config.an_cap;
  const std::size_t n = total_gts(gts);
  if (n == 0) {
    s.empty_ground_truth = true;
    s.average_recall = 1.0;
    s.auc = 1.0;
    s.recall_per_threshold.assign(config.iou_grid.size(), 1.0);
    s.ar_an.assign(cap, 1.0);
    return s;
  }
  const auto counts = matched_prefix_counts(detections, gts, config.iou_grid, cap);
  const double grid = static_cast<double>(config.iou_grid.size());
  // Sum the per-threshold recalls first, then divide once.
  s.ar_an.assign(cap, 0.0);
  for (std::size_t g = 0; g < counts.size(); ++g) {
    s.recall_per_threshold.push_back(static_cast<double>(counts[g].back()) / static_cast<double>(n));
    for (std::size_t a = 0; a < cap; ++a) {
      s.ar_an[a] += static_cast<double>(counts[g][a]) / static_cast<double>(n);
    }
  }
  for (auto& x : s.ar_an) x /= grid;
  s.average_recall = s.ar_an.back();
  if (cap == 1) {
    s.auc = s.ar_an[0];
  } else {
    double area = 0.0;
    for (std::size_t a = 1; a < cap; ++a) area += 0.5 * (s.ar_an[a - 1] + s.ar_an[a]);
    s.auc = area / static_cast<double>(cap - 1);
  }
  return s;
}

double average_precision(const DetectionMap& detections, const GroundTruthMap& gts, int class_id,
                         double iou_threshold, double min_gt_width) {
  const bool any_class = class_id < 0;
  struct Entry {
    double score;
    int outcome;  // 1 true positive, 0 false positive, -1 dropped
  };
  std::vector<Entry> sweep;
  std::size_t positives = 0;
  for (const auto& id : video_ids(detections, gts)) {
    std::vector<const data::GroundTruthInstance*> targets;
    for (const auto& gt : gts_of(gts, id)) {
      if (any_class || gt.class_id == class_id) {
        targets.push_back(&gt);
        if (gt.width >= min_gt_width) ++positives;
      }
    }
    auto it = detections.find(id);
    if (it == detections.end()) continue;
    std::vector<Detection> mine;
    for (const auto& d : it->second) {
      if (any_class || d.class_id == class_id) mine.push_back(d);
    }
    const auto order = score_order(mine);
    std::vector<const Detection*> ranked;
    for (auto i : order) ranked.push_back(&mine[i]);
    const auto match = greedy_match(ranked, targets, iou_threshold);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      int outcome = 0;
      if (match[i] >= 0) {
        outcome = targets[static_cast<std::size_t>(match[i])]->width >= min_gt_width ? 1 : -1;
      }
      sweep.push_back({ranked[i]->score, outcome});
    }
  }
  if (positives == 0) return std::numeric_limits<double>::quiet_NaN();
  // Videos were appended in id order; a stable sort keeps that order on ties.
  std::stable_sort(sweep.begin(), sweep.end(),
                   [](const Entry& a, const Entry& b) { return a.score > b.score; });
  std::vector<double> precision, recall;
  double tp = 0.0, fp = 0.0;
  for (const auto& e : sweep) {
    if (e.outcome < 0) continue;
    (e.outcome == 1 ? tp : fp) += 1.0;
    precision.push_back(tp / (tp + fp));
    recall.push_back(tp / static_cast<double>(positives));
  }
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev) * precision[i];
    prev = recall[i];
  }
  return ap;
}

MapResult map_at(const DetectionMap& detections, const GroundTruthMap& gts, int num_classes,
                 double iou_threshold, bool class_agnostic, double min_gt_width) {
  MapResult r;
  if (class_agnostic) {
    const double ap = average_precision(detections, gts, -1, iou_threshold, min_gt_width);
    r.per_class = {ap};
    if (!std::isnan(ap)) {
      r.map = ap;
      r.classes_with_gt = 1;
    }
    return r;
  }
  double sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const double ap = average_precision(detections, gts, c, iou_threshold, min_gt_width);
    r.per_class.push_back(ap);
    if (!std::isnan(ap)) {
      sum += ap;
      ++r.classes_with_gt;
    }
  }
  r.map = r.classes_with_gt > 0 ? sum / static_cast<double>(r.classes_with_gt) : 0.0;
  return r;
}

EvalReport evaluate(const DetectionMap& detections, const GroundTruthMap& gts, int num_classes,
                    const EvalConfig& config) {
  config.validate();
  EvalReport rep;
  rep.map_thresholds = config.map_thresholds;
  for (double a : config.map_thresholds) {
    rep.map.push_back(map_at(detections, gts, num_classes, a, config.class_agnostic).map);
    rep.long_map.push_back(
        map_at(detections, gts, num_classes, a, config.class_agnostic, config.long_width).map);
  }
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  rep.average_map = mean(rep.map);
  rep.average_long_map = mean(rep.long_map);

  const auto ar = average_recall(detections, gts, config);
  rep.average_recall = ar.average_recall;
  rep.auc = ar.auc;
  rep.ar_an = ar.ar_an;
  rep.empty_ground_truth = ar.empty_ground_truth;
  for (int i = 1; i <= 20; ++i) {
    const double t = 0.05 * i;
    rep.recall_iou.emplace_back(t, recall_at(detections, gts, t, config.an_cap).recall);
  }
  return rep;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  json maps = json::array();
  for (std::size_t i = 0; i < report.map_thresholds.size(); ++i) {
    maps.push_back({{"iou", report.map_thresholds[i]},
                    {"map", report.map[i]},
                    {"long_map", report.long_map[i]}});
  }
  j["map"] = std::move(maps);
  j["average_map"] = report.average_map;
  j["average_long_map"] = report.average_long_map;
  j["average_recall"] = report.average_recall;
  j["auc"] = report.auc;
  j["empty_ground_truth"] = report.empty_ground_truth;
  json rc = json::array();
  for (const auto& [t, r] : report.recall_iou) rc.push_back({{"iou", t}, {"recall", r}});
  j["recall_iou"] = std::move(rc);
  j["ar_an"] = report.ar_an;
  return j.dump(2) + "\n";
}

std::string curves_to_csv(const EvalReport& report) {
  std::string out = "curve,x,value\n";
  char line[96];
  for (const auto& [t, r] : report.recall_iou) {
    std::snprintf(line, sizeof(line), "recall_iou,%.2f,%.17g\n", t, r);
    out += line;
  }
  for (std::size_t n = 0; n < report.ar_an.size(); ++n) {
    std::snprintf(line, sizeof(line), "ar_an,%zu,%.17g\n", n + 1, report.ar_an[n]);
    out += line;
  }
  return out;
}

}  // namespace gtan::metrics
