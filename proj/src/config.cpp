// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include "gtan/config.hpp"

#include <fstream>
#include <set>
#include <type_traits>

#include "gtan/errors.hpp"

namespace gtan::config {

namespace {

// Strict reader over one JSON object: fields absent keep their defaults,
// unknown fields are an error once finish() runs.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(where_ + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected a boolean");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(key, "expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(key, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected a string");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
  }

  const json* section(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ValidationError("unknown key '" + where_ + "." + k + "'");
    }
  }

 private:
  [[noreturn]] void fail(const char* key, const std::string& why) const {
    throw ValidationError(where_ + "." + key + ": " + why);
  }

  const json& j_;
  std::string where_;
  std::set<std::string, std::less<>> seen_;
};

void read_network(Reader& r, network::NetworkConfig& n) {
  r.get("input_dim", n.input_dim);
  r.get("num_classes", n.num_classes);
  r.get("base_channels", n.base_channels);
  r.get("anchor_channels", n.anchor_channels);
  r.get("anchor_kernel", n.anchor_kernel);
  r.get("anchor_stride", n.anchor_stride);
  r.get("max_anchor_layers", n.max_anchor_layers);
  r.get("channel_divisor", n.channel_divisor);
  r.get("nominal_length", n.nominal_length);
  r.get("ratios", n.ratios);
  r.get("epsilon", n.epsilon);
  r.get("alpha1", n.alpha1);
  r.get("alpha2", n.alpha2);
}

json network_fields(const network::NetworkConfig& n) {
  return {{"input_dim", n.input_dim},
          {"num_classes", n.num_classes},
          {"base_channels", n.base_channels},
          {"anchor_channels", n.anchor_channels},
          {"anchor_kernel", n.anchor_kernel},
          {"anchor_stride", n.anchor_stride},
          {"max_anchor_layers", n.max_anchor_layers},
          {"channel_divisor", n.channel_divisor},
          {"nominal_length", n.nominal_length},
          {"ratios", n.ratios},
          {"epsilon", n.epsilon},
          {"alpha1", n.alpha1},
          {"alpha2", n.alpha2}};
}

void read_eval(Reader& r, metrics::EvalConfig& e) {
  r.get("iou_grid", e.iou_grid);
  r.get("an_cap", e.an_cap);
  r.get("class_agnostic", e.class_agnostic);
  r.get("map_thresholds", e.map_thresholds);
  r.get("long_width", e.long_width);
}

}  // namespace

void RunConfig::validate() const {
  auto probe = network;
  if (probe.input_dim == 0) probe.input_dim = 1;
  if (probe.num_classes == 0) probe.num_classes = 1;
  probe.validate();
  training.validate();
  if (!(inference.nms.decay > 0.0)) throw ValidationError("inference.decay must be positive");
  if (!(inference.nms.threshold >= 0.0 && inference.nms.threshold <= 1.0)) {
    throw ValidationError("inference.threshold must lie in [0, 1]");
  }
  if (inference.max_detections < 1) throw ValidationError("inference.max_detections must be >= 1");
  eval.validate();
  if (ablation.fixed_scale == ablation.gaussian_kernel) {
    throw ValidationError("ablation: exactly one of fixed_scale and gaussian_kernel must be set");
  }
  if (ablation.gaussian_grouping && !ablation.gaussian_kernel) {
    throw ValidationError("ablation: gaussian_grouping requires gaussian_kernel");
  }
}

bool operator==(const RunConfig& a, const RunConfig& b) { return to_json(a) == to_json(b); }

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Reader root(j, "config");
  root.get("seed", c.seed);
  if (const json* s = root.section("network")) {
    Reader r(*s, "network");
    read_network(r, c.network);
    r.finish();
  }
  if (const json* s = root.section("training")) {
    Reader r(*s, "training");
    auto& t = c.training;
    r.get("learning_rate", t.sgd.learning_rate);
    r.get("momentum", t.sgd.momentum);
    r.get("weight_decay", t.sgd.weight_decay);
    r.get("decay_interval", t.sgd.decay_interval);
    r.get("decay_factor", t.sgd.decay_factor);
    r.get("batch_size", t.batch_size);
    r.get("beta", t.loss.beta);
    r.get("gamma", t.loss.gamma);
    r.get("fg_threshold", t.fg_threshold);
    r.get("bg_threshold", t.bg_threshold);
    r.get("bg_per_fg", t.bg_per_fg);
    r.get("epochs", c.epochs);
    r.get("checkpoint_every", c.checkpoint_every);
    r.finish();
  }
  if (const json* s = root.section("inference")) {
    Reader r(*s, "inference");
    r.get("decay", c.inference.nms.decay);
    r.get("threshold", c.inference.nms.threshold);
    r.get("max_detections", c.inference.max_detections);
    r.finish();
  }
  if (const json* s = root.section("eval")) {
    Reader r(*s, "eval");
    read_eval(r, c.eval);
    r.finish();
  }
  if (const json* s = root.section("ablation")) {
    Reader r(*s, "ablation");
    r.get("fixed_scale", c.ablation.fixed_scale);
    r.get("gaussian_kernel", c.ablation.gaussian_kernel);
    r.get("gaussian_grouping", c.ablation.gaussian_grouping);
    r.finish();
    // A lone fixed_scale switch turns the learned kernels (and grouping) off.
    if (c.ablation.fixed_scale && !s->contains("gaussian_kernel")) c.ablation.gaussian_kernel = false;
    if (c.ablation.fixed_scale && !s->contains("gaussian_grouping")) c.ablation.gaussian_grouping = false;
  }
  if (const json* s = root.section("data")) {
    Reader r(*s, "data");
    r.get("train", c.data.train);
    r.get("test", c.data.test);
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  const auto& t = c.training;
  return {{"seed", c.seed},
          {"network", network_fields(c.network)},
          {"training",
           {{"learning_rate", t.sgd.learning_rate},
            {"momentum", t.sgd.momentum},
            {"weight_decay", t.sgd.weight_decay},
            {"decay_interval", t.sgd.decay_interval},
            {"decay_factor", t.sgd.decay_factor},
            {"batch_size", t.batch_size},
            {"beta", t.loss.beta},
            {"gamma", t.loss.gamma},
            {"fg_threshold", t.fg_threshold},
            {"bg_threshold", t.bg_threshold},
            {"bg_per_fg", t.bg_per_fg},
            {"epochs", c.epochs},
            {"checkpoint_every", c.checkpoint_every}}},
          {"inference",
           {{"decay", c.inference.nms.decay},
            {"threshold", c.inference.nms.threshold},
            {"max_detections", c.inference.max_detections}}},
          {"eval", to_json(c.eval)},
          {"ablation",
           {{"fixed_scale", c.ablation.fixed_scale},
            {"gaussian_kernel", c.ablation.gaussian_kernel},
            {"gaussian_grouping", c.ablation.gaussian_grouping}}},
          {"data", {{"train", c.data.train}, {"test", c.data.test}}}};
}

json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("malformed JSON in " + file.string() + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& file) {
  return run_config_from_json(read_json_file(file));
}

json network_to_json(const network::NetworkConfig& net) {
  json j = network_fields(net);
  j["fixed_scale"] = net.fixed_scale;
  j["gaussian_grouping"] = net.gaussian_grouping;
  return j;
}

network::NetworkConfig network_from_json(const json& j) {
  network::NetworkConfig n;
  Reader r(j, "network");
  read_network(r, n);
  r.get("fixed_scale", n.fixed_scale);
  r.get("gaussian_grouping", n.gaussian_grouping);
  r.finish();
  n.validate();
  return n;
}

network::NetworkConfig effective_network(const RunConfig& config, const data::Dataset& dataset) {
  auto n = config.network;
  if (dataset.videos.empty()) throw ValidationError("cannot size a network from an empty corpus");
  const std::size_t dim = dataset.videos.front().dim;
  std::size_t longest = 0;
  for (const auto& v : dataset.videos) {
    if (v.dim != dim) throw ValidationError("videos disagree on feature dimension");
    longest = std::max(longest, v.length);
  }
  if (n.input_dim == 0) n.input_dim = dim;
  if (n.input_dim != dim) {
    throw ValidationError("config input_dim " + std::to_string(n.input_dim) +
                          " does not match corpus dimension " + std::to_string(dim));
  }
  if (n.num_classes == 0) n.num_classes = dataset.num_classes;
  if (n.num_classes != dataset.num_classes) {
    throw ValidationError("config num_classes does not match the corpus");
  }
  if (n.nominal_length == 0) n.nominal_length = longest;
  n.fixed_scale = config.ablation.fixed_scale;
  n.gaussian_grouping = config.ablation.gaussian_grouping;
  n.validate();
  return n;
}

data::SyntheticSpec synthetic_spec_from_json(const json& j) {
  data::SyntheticSpec s;
  Reader r(j, "synthetic");
  r.get("num_videos", s.num_videos);
  r.get("T", s.length);
  r.get("D", s.dim);
  r.get("num_classes", s.num_classes);
  r.get("min_instances", s.min_instances);
  r.get("max_instances", s.max_instances);
  r.get("min_width", s.min_width);
  r.get("max_width", s.max_width);
  r.get("snr", s.snr);
  r.get("seed", s.seed);
  if (j.contains("class_seed")) {
    std::uint64_t class_seed = 0;
    r.get("class_seed", class_seed);
    s.class_seed = class_seed;
  }
  r.finish();
  s.validate();
  return s;
}

json to_json(const data::SyntheticSpec& s) {
  json out = {{"num_videos", s.num_videos}, {"T", s.length},
          {"D", s.dim},                 {"num_classes", s.num_classes},
          {"min_instances", s.min_instances}, {"max_instances", s.max_instances},
          {"min_width", s.min_width},   {"max_width", s.max_width},
          {"snr", s.snr},               {"seed", s.seed}};
  if (s.class_seed) out["class_seed"] = *s.class_seed;
  return out;
}

metrics::EvalConfig eval_config_from_json(const json& j) {
  metrics::EvalConfig e;
  Reader r(j, "eval");
  read_eval(r, e);
  r.finish();
  e.validate();
  return e;
}

json to_json(const metrics::EvalConfig& e) {
  return {{"iou_grid", e.iou_grid},
          {"an_cap", e.an_cap},
          {"class_agnostic", e.class_agnostic},
          {"map_thresholds", e.map_thresholds},
          {"long_width", e.long_width}};
}

std::uint64_t init_seed(const RunConfig& config) { return training::mix_seed(config.seed, 1); }
std::uint64_t train_seed(const RunConfig& config) { return training::mix_seed(config.seed, 2); }

}  // namespace gtan::config
