// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// Temporal Gaussian kernels: per-cell spreads, default boxes, kernel
// grouping and Gaussian pooling. All positions live on the normalized time
// axis [0, 1]; a layer with T cells places cell t at p = t / T.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gtan/autodiff.hpp"

namespace gtan::gaussian {

// Spreads are clamped into [kMinSpread, kMaxSpread] before use.
inline constexpr double kMinSpread = 1e-4;
inline constexpr double kMaxSpread = 1.0 - 1e-4;

struct Segment {
  double start = 0.0;
  double end = 0.0;

  static Segment from_center_width(double center, double width) {
    return {center - 0.5 * width, center + 0.5 * width};
  }
  double length() const { return end - start; }
  double center() const { return 0.5 * (start + end); }
  Segment clamped() const;
};

// Intersection over union of the clamped extents; 0 for an empty union.
double segment_iou(const Segment& a, const Segment& b);

struct GaussianKernel {
  double mu = 0.0;          // centre of the Gaussian
  double spread = 0.0;      // normalized standard deviation s
  double box_center = 0.0;  // default-box centre a_c
  std::vector<int> cells;   // ascending constituents; size 1 for a cell kernel
  ad::Tensor spread_node;   // scalar producing `spread` (mixed kernels only)

  bool mixed() const { return cells.size() > 1; }
};

struct DefaultBox {
  double center = 0.0;  // a_c
  double width = 0.0;   // a_w, unclamped
  int ratio_index = 0;
  double ratio = 1.0;

  Segment raw() const { return Segment::from_center_width(center, width); }
  Segment extent() const { return raw().clamped(); }
};

// Kernel of cell t on a layer of `length` cells.
GaussianKernel cell_kernel(int t, std::size_t length, double spread);

// a_c from the kernel, a_w = ratio * 2 * s.
DefaultBox default_box(const GaussianKernel& kernel, double ratio, int ratio_index);

double box_iou(const DefaultBox& a, const DefaultBox& b);

// Normalized Gaussian weights over `length` cells with (1/T) * sum(W) = 1.
std::vector<double> kernel_weights(double mu, double spread, std::size_t length);

// Differentiable form: spreads [K] -> weights [K, T] (rank-0 spreads -> [T]).
ad::Tensor kernel_weights(ad::Graph& g, const ad::Tensor& spreads,
                          std::span<const double> mus, std::size_t length);

// Spread head: sigmoid(conv1d(k=3, s=1, p=1)) over a [D, T] map, clamped.
// head_weight [1, D, 3], head_bias [1] -> spreads [T].
ad::Tensor sigma_from_features(ad::Graph& g, const ad::Tensor& layer_map,
                               const ad::Tensor& head_weight, const ad::Tensor& head_bias);

// Bias that makes the initial spread 1 / (2 T), i.e. a default width of 1 / T.
double initial_sigma_bias(std::size_t length);

// Runs of consecutive cells merged by the left-to-right grouping scan; only
// runs of two or more cells are returned. `kernels` must be cell kernels in
// ascending cell order. IoU uses ratio-1 default boxes and must exceed `epsilon`.
std::vector<std::vector<int>> grouping_runs(std::span<const GaussianKernel> kernels,
                                            double epsilon, std::size_t length);

// Builds the mixed kernel for each run. Spreads stay differentiable with
// respect to `cell_spreads` [T] through the union extent.
std::vector<GaussianKernel> build_mixed(ad::Graph& g, std::span<const GaussianKernel> kernels,
                                        const ad::Tensor& cell_spreads,
                                        std::span<const std::vector<int>> runs,
                                        std::size_t length);

// grouping_runs followed by build_mixed.
std::vector<GaussianKernel> group_kernels(ad::Graph& g, std::span<const GaussianKernel> kernels,
                                          const ad::Tensor& cell_spreads, double epsilon,
                                          std::size_t length);

// F = (1/T) sum_i W[i] f_i for every kernel. time_major [T, D], spreads [K]
// -> [K, D].
ad::Tensor gaussian_pool(ad::Graph& g, const ad::Tensor& time_major,
                         const ad::Tensor& spreads, std::span<const double> mus);

// Single kernel -> [D]. Uses kernel.spread_node when set, else a constant.
ad::Tensor gaussian_pool(ad::Graph& g, const ad::Tensor& time_major,
                         const GaussianKernel& kernel);

}  // namespace gtan::gaussian
