// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// Run configuration as strict JSON. Every field has a default; unknown keys
// are rejected so that typos fail loudly.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gtan/data.hpp"
#include "gtan/inference.hpp"
#include "gtan/metrics.hpp"
#include "gtan/network.hpp"
#include "gtan/training.hpp"
#include "json.hpp"

namespace gtan::config {

using json = nlohmann::json;

struct AblationConfig {
  bool fixed_scale = false;
  bool gaussian_kernel = true;
  bool gaussian_grouping = true;

  bool operator==(const AblationConfig&) const = default;
};

struct DataConfig {
  std::string train;  // corpus directory
  std::string test;

  bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
  network::NetworkConfig network;  // input_dim / num_classes 0 = from data
  training::TrainConfig training;
  std::uint64_t epochs = 10;
  std::uint64_t checkpoint_every = 0;  // epochs; 0 keeps only the final one
  inference::InferenceConfig inference;
  metrics::EvalConfig eval;
  AblationConfig ablation;
  DataConfig data;
  std::uint64_t seed = 0;

  void validate() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

RunConfig run_config_from_json(const json& j);
json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& file);

// Full network description including the ablation switches.
json network_to_json(const network::NetworkConfig& net);
network::NetworkConfig network_from_json(const json& j);

// Network config with data dimensions filled in and the ablation applied.
network::NetworkConfig effective_network(const RunConfig& config, const data::Dataset& dataset);

data::SyntheticSpec synthetic_spec_from_json(const json& j);
json to_json(const data::SyntheticSpec& spec);

metrics::EvalConfig eval_config_from_json(const json& j);
json to_json(const metrics::EvalConfig& config);

// Seeds for parameter initialization and for the training stream.
std::uint64_t init_seed(const RunConfig& config);
std::uint64_t train_seed(const RunConfig& config);

json read_json_file(const std::filesystem::path& file);

}  // namespace gtan::config
