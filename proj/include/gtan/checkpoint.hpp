// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoints.
//
// Layout: "GTAN" | u32 version | u64 network digest | u64 manifest bytes |
// JSON manifest | float64 payload. Integers and floats are little-endian.
// The payload holds every parameter in manifest order, followed by the
// momentum buffers when a training state is present.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "gtan/network.hpp"
#include "gtan/training.hpp"
#include "json.hpp"

namespace gtan::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct TrainingState {
  training::OptimizerState optimizer;
  training::TrainProgress progress;
};

struct Checkpoint {
  network::NetworkConfig network;
  nlohmann::json run_config;  // effective run configuration, may be null
  network::ParameterStore params;
  std::optional<TrainingState> training;
};

// FNV-1a over the canonical JSON of the network configuration.
std::uint64_t network_digest(const network::NetworkConfig& net);

void save(const std::filesystem::path& file, const Checkpoint& checkpoint);
Checkpoint load(const std::filesystem::path& file);

}  // namespace gtan::checkpoint
