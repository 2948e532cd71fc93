// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// Finite-difference check of the full forward + loss pipeline.
//
// The grouping topology and the label assignment are frozen at the starting
// point, so the loss is a fixed piecewise-smooth function of the parameters.
// A coordinate whose +h or -h evaluation lands on a different linear piece
// (ReLU mask, pool winner, clamp, min/max, smooth-L1 branch) is skipped and
// replaced by another draw from the same tensor.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gtan::gradcheck {

struct GradcheckConfig {
  std::size_t length = 64;
  std::size_t dim = 8;
  int num_classes = 2;
  std::size_t anchor_layers = 2;
  std::size_t base_channels = 8;
  std::size_t anchor_channels = 8;
  std::uint64_t seed = 7;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t coords_per_tensor = 100;
  // Initial spread in cells; about 3 makes neighbouring kernels straddle the
  // grouping threshold.
  double spread_cells = 3.0;
};

struct GroupResult {
  std::string name;  // parameter name, with a path suffix for spread variants
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_error = 0.0;
};

struct GradcheckReport {
  std::vector<GroupResult> groups;
  double max_error = 0.0;
  bool passed = false;
  std::size_t mixed_kernels = 0;
  std::size_t num_fg = 0;
  std::size_t num_bg = 0;
};

GradcheckReport run(const GradcheckConfig& config);

}  // namespace gtan::gradcheck
