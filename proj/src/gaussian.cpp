// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include "gtan/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gtan/errors.hpp"

namespace gtan::gaussian {

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

// Ratio-1 extent of a kernel as used by the grouping scan.
Segment grouping_extent(double center, double spread) {
  return {clamp01(center - spread), clamp01(center + spread)};
}

// Unnormalized log-weights, then W = T * softmax.
void fill_weights(double mu, double spread, std::size_t length, double* out) {
  if (!(spread > 0.0)) throw ValidationError("kernel spread must be positive");
  const double T = static_cast<double>(length);
  const double inv = 1.0 / (2.0 * spread * spread);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < length; ++i) {
    const double d = static_cast<double>(i) / T - mu;
    out[i] = -d * d * inv;
    peak = std::max(peak, out[i]);
  }
  double z = 0.0;
  for (std::size_t i = 0; i < length; ++i) z += (out[i] = std::exp(out[i] - peak));
  for (std::size_t i = 0; i < length; ++i) out[i] = T * out[i] / z;
}

}  // namespace

Segment Segment::clamped() const { return {clamp01(start), clamp01(end)}; }

double segment_iou(const Segment& a, const Segment& b) {
  const Segment x = a.clamped(), y = b.clamped();
  const double inter = std::max(0.0, std::min(x.end, y.end) - std::max(x.start, y.start));
  const double uni = std::max(x.end, y.end) - std::min(x.start, y.start);
  if (uni <= 0.0) return 0.0;
  // Union of disjoint segments overstates the covered length but the IoU is 0 anyway.
  return inter / uni;
}

GaussianKernel cell_kernel(int t, std::size_t length, double spread) {
  GaussianKernel k;
  const double T = static_cast<double>(length);
  k.mu = static_cast<double>(t) / T;
  k.box_center = (static_cast<double>(t) + 0.5) / T;
  k.spread = spread;
  k.cells = {t};
  return k;
}

DefaultBox default_box(const GaussianKernel& kernel, double ratio, int ratio_index) {
  DefaultBox box;
  box.center = kernel.box_center;
  box.width = ratio * 2.0 * kernel.spread;
  box.ratio = ratio;
  box.ratio_index = ratio_index;
  return box;
}

double box_iou(const DefaultBox& a, const DefaultBox& b) {
  return segment_iou(a.raw(), b.raw());
}

std::vector<double> kernel_weights(double mu, double spread, std::size_t length) {
  if (length == 0) throw ValidationError("kernel_weights needs at least one cell");
  std::vector<double> w(length);
  fill_weights(mu, spread, length, w.data());
  return w;
}

ad::Tensor kernel_weights(ad::Graph& g, const ad::Tensor& spreads, std::span<const double> mus,
                          std::size_t length) {
  if (length == 0) throw ValidationError("kernel_weights needs at least one cell");
  const std::size_t count = spreads.numel();
  if (mus.size() != count) throw DimensionError("kernel_weights: one centre per spread required");
  std::vector<double> w(count * length);
  for (std::size_t k = 0; k < count; ++k) {
    fill_weights(mus[k], spreads.at(k), length, w.data() + k * length);
  }
  ad::Shape shape = spreads.rank() == 0 ? ad::Shape{length} : ad::Shape{count, length};
  auto sn = spreads.node();
  std::vector<double> centers(mus.begin(), mus.end());
  return g.emit("gaussian_weights", std::move(shape), std::move(w), {&spreads},
                [sn, length, centers = std::move(centers)](const ad::Node& out) {
                  const double T = static_cast<double>(length);
                  for (std::size_t k = 0; k < centers.size(); ++k) {
                    const double s = sn->value[k];
                    const double s3 = s * s * s;
                    const double* wk = out.value.data() + k * length;
                    const double* gk = out.grad.data() + k * length;
                    double mean_q = 0.0;
                    for (std::size_t i = 0; i < length; ++i) {
                      const double d = static_cast<double>(i) / T - centers[k];
                      mean_q += wk[i] / T * (d * d / s3);
                    }
                    double acc = 0.0;
                    for (std::size_t i = 0; i < length; ++i) {
                      const double d = static_cast<double>(i) / T - centers[k];
                      acc += gk[i] * wk[i] * (d * d / s3 - mean_q);
                    }
                    sn->grad[k] += acc;
                  }
                });
}

ad::Tensor sigma_from_features(ad::Graph& g, const ad::Tensor& layer_map,
                               const ad::Tensor& head_weight, const ad::Tensor& head_bias) {
  if (head_weight.rank() != 3 || head_weight.dim(0) != 1 || head_weight.dim(2) != 3) {
    throw DimensionError("spread head must be a [1, D, 3] convolution");
  }
  auto logits = ad::conv1d(g, layer_map, head_weight, head_bias, 1, 1);
  auto s = ad::sigmoid(g, logits);
  s = ad::clamp(g, s, kMinSpread, kMaxSpread);
  return ad::reshape(g, s, {layer_map.dim(1)});
}

double initial_sigma_bias(std::size_t length) {
  const double p = 1.0 / (2.0 * static_cast<double>(length));
  return std::log(p / (1.0 - p));
}

std::vector<std::vector<int>> grouping_runs(std::span<const GaussianKernel> kernels,
                                            double epsilon, std::size_t length) {
  std::vector<std::vector<int>> runs;
  if (kernels.empty()) return runs;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    if (kernels[i].mixed()) throw ValidationError("grouping expects cell kernels");
    if (i > 0 && kernels[i].cells[0] <= kernels[i - 1].cells[0]) {
      throw ValidationError("grouping expects kernels in ascending cell order");
    }
  }
  const double T = static_cast<double>(length);

  std::vector<int> run = {kernels[0].cells[0]};
  Segment base = grouping_extent(kernels[0].box_center, kernels[0].spread);
  double cell_sum = kernels[0].cells[0];
  for (std::size_t z = 1; z < kernels.size(); ++z) {
    const Segment next = grouping_extent(kernels[z].box_center, kernels[z].spread);
    if (segment_iou(base, next) > epsilon) {
      const double start = std::min(base.start, next.start);
      const double end = std::max(base.end, next.end);
      const double spread = 0.5 * (end - start);
      run.push_back(kernels[z].cells[0]);
      cell_sum += kernels[z].cells[0];
      const double mu = cell_sum / (static_cast<double>(run.size()) * T);
      base = grouping_extent(mu, spread);
    } else {
      if (run.size() > 1) runs.push_back(run);
      run = {kernels[z].cells[0]};
      base = grouping_extent(kernels[z].box_center, kernels[z].spread);
      cell_sum = kernels[z].cells[0];
    }
  }
  if (run.size() > 1) runs.push_back(run);
  return runs;
}

std::vector<GaussianKernel> build_mixed(ad::Graph& g, std::span<const GaussianKernel> kernels,
                                        const ad::Tensor& cell_spreads,
                                        std::span<const std::vector<int>> runs,
                                        std::size_t length) {
  const double T = static_cast<double>(length);
  auto cell_index = [&](int cell) -> const GaussianKernel& {
    for (const auto& k : kernels) {
      if (k.cells[0] == cell) return k;
    }
    throw ValidationError("grouping run references an unknown cell");
  };
  auto endpoints = [&](const ad::Tensor& spread, double center) {
    auto start = ad::clamp(g, ad::affine(g, spread, -1.0, center), 0.0, 1.0);
    auto end = ad::clamp(g, ad::affine(g, spread, 1.0, center), 0.0, 1.0);
    return std::pair{start, end};
  };

  std::vector<GaussianKernel> mixed;
  for (const auto& run : runs) {
    if (run.size() < 2) throw ValidationError("a mixed kernel needs at least two cells");
    const std::size_t first = static_cast<std::size_t>(run[0]);
    auto [start, end] = endpoints(ad::gather(g, cell_spreads, std::span(&first, 1)),
                                  cell_index(run[0]).box_center);
    ad::Tensor spread;
    double cell_sum = run[0];
    double mu = 0.0;
    for (std::size_t i = 1; i < run.size(); ++i) {
      const std::size_t cell = static_cast<std::size_t>(run[i]);
      auto [z_start, z_end] = endpoints(ad::gather(g, cell_spreads, std::span(&cell, 1)),
                                        cell_index(run[i]).box_center);
      auto u_start = ad::minimum(g, start, z_start);
      auto u_end = ad::maximum(g, end, z_end);
      spread = ad::affine(g, ad::sub(g, u_end, u_start), 0.5, 0.0);
      cell_sum += run[i];
      mu = cell_sum / (static_cast<double>(i + 1) * T);
      std::tie(start, end) = endpoints(spread, mu);
    }
    spread = ad::clamp(g, spread, kMinSpread, kMaxSpread);
    GaussianKernel k;
    k.mu = mu;
    k.box_center = mu;
    k.spread = spread.item();
    k.cells = run;
    k.spread_node = ad::reshape(g, spread, {});
    mixed.push_back(std::move(k));
  }
  return mixed;
}

std::vector<GaussianKernel> group_kernels(ad::Graph& g, std::span<const GaussianKernel> kernels,
                                          const ad::Tensor& cell_spreads, double epsilon,
                                          std::size_t length) {
  const auto runs = grouping_runs(kernels, epsilon, length);
  return build_mixed(g, kernels, cell_spreads, runs, length);
}

ad::Tensor gaussian_pool(ad::Graph& g, const ad::Tensor& time_major, const ad::Tensor& spreads,
                         std::span<const double> mus) {
  if (time_major.rank() != 2) throw DimensionError("gaussian_pool expects a [T, D] map");
  const std::size_t length = time_major.dim(0);
  auto w = kernel_weights(g, spreads, mus, length);
  w = ad::affine(g, w, 1.0 / static_cast<double>(length), 0.0);
  return ad::reduce_weighted_sum(g, time_major, w);
}

ad::Tensor gaussian_pool(ad::Graph& g, const ad::Tensor& time_major, const GaussianKernel& kernel) {
  ad::Tensor spread = kernel.spread_node.defined() ? kernel.spread_node
                                                   : ad::Tensor::scalar(kernel.spread);
  const double mu = kernel.mu;
  return gaussian_pool(g, time_major, spread, std::span(&mu, 1));
}

}  // namespace gtan::gaussian
