// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// Base feature network, the cascade of strided anchor layers, per-cell
// Gaussian kernels and the three prediction heads.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gtan/autodiff.hpp"
#include "gtan/data.hpp"
#include "gtan/gaussian.hpp"

namespace gtan::network {

std::vector<double> default_ratios();

struct NetworkConfig {
  std::size_t input_dim = 0;
  int num_classes = 0;
  // 0 selects min(512, 4 * input_dim).
  std::size_t base_channels = 0;
  std::vector<std::size_t> anchor_channels = {512, 512, 1024, 1024, 2048, 2048, 4096, 4096};
  std::size_t anchor_kernel = 3;
  std::size_t anchor_stride = 2;
  std::size_t max_anchor_layers = 8;
  // Anchor channel widths are divided by this (desk scale); 1 keeps them.
  std::size_t channel_divisor = 1;
  // Longest input the parameters are built for; 0 allocates every layer.
  std::size_t nominal_length = 0;
  std::vector<double> ratios = default_ratios();
  double epsilon = 0.7;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  // Constant width 1/T_j per layer and no Gaussian pooling.
  bool fixed_scale = false;
  bool gaussian_grouping = true;

  void validate() const;
  std::size_t effective_base_channels() const;
  std::size_t layer_channels(std::size_t layer) const;
  // Anchor layer lengths for an input of `length` clips; stops at length 1
  // or at the layer cap.
  std::vector<std::size_t> layer_lengths(std::size_t length) const;
  // Number of anchor layers that own parameters.
  std::size_t parameter_depth() const;
  std::size_t num_ratios() const { return ratios.size(); }
};

struct Parameter {
  std::string name;
  ad::Tensor tensor;
};

// Ordered, uniquely named trainable tensors.
class ParameterStore {
 public:
  ad::Tensor& add(std::string name, ad::Shape shape);
  const ad::Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Parameter>& entries() { return entries_; }
  const std::vector<Parameter>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;

  void zero_grad();
  // Deep copy with fresh leaves.
  ParameterStore clone() const;
  // Copies values from a store with identical names and shapes.
  void copy_values_from(const ParameterStore& other);

 private:
  std::vector<Parameter> entries_;
};

struct Refined {
  double center = 0.0;
  double width = 0.0;
};

// phi_c = a_c + alpha1 * a_w * dc, phi_w = a_w * exp(alpha2 * dw).
Refined refine(const gaussian::DefaultBox& box, double delta_c, double delta_w,
               double alpha1, double alpha2);

struct Proposal {
  int layer = 0;
  int kernel = 0;       // index into the layer's kernel list
  int ratio_index = 0;
  gaussian::DefaultBox box;
  std::vector<double> class_logits;  // C + 1, background last
  double delta_c = 0.0;
  double delta_w = 0.0;
  double overlap_logit = 0.0;

  double overlap() const;
};

struct LayerOutput {
  std::size_t length = 0;
  ad::Tensor map;           // [D_j, T_j]
  ad::Tensor cell_spreads;  // [T_j]
  std::vector<gaussian::GaussianKernel> kernels;  // cells first, then mixed
  ad::Tensor width_spreads;  // [K], feeds the default widths
  ad::Tensor pool_spreads;   // [K], feeds Gaussian pooling
  ad::Tensor pooled;         // [K, D_j]
  ad::Tensor cls;            // [R * (C + 1), K]
  ad::Tensor loc;            // [2R, K]: rows 2r = dc, 2r + 1 = dw
  ad::Tensor overlap;        // [R, K] logits
};

// Grouping runs per layer, so a forward pass can replay a fixed topology.
struct Topology {
  std::vector<std::vector<std::vector<int>>> runs;
};

struct ForwardOptions {
  const Topology* topology = nullptr;
  // Per-layer spread values to use in place of the computed ones for one of
  // the two consumers. The replaced path carries no gradient.
  const std::vector<std::vector<double>>* fixed_pool_spreads = nullptr;
  const std::vector<std::vector<double>>* fixed_width_spreads = nullptr;
};

struct ForwardResult {
  std::vector<LayerOutput> layers;
  std::vector<Proposal> proposals;  // layer, kernel, ratio order
  Topology topology;
};

class Network {
 public:
  explicit Network(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }

  // Names and shapes of every parameter, in store order.
  std::vector<std::pair<std::string, ad::Shape>> parameter_layout() const;
  ParameterStore init_parameters(std::uint64_t seed) const;

  // features [D, T] -> [D_b, ceil(T / 2)].
  ad::Tensor base_forward(ad::Graph& g, const ParameterStore& params,
                          const ad::Tensor& features) const;
  std::vector<ad::Tensor> anchor_forward(ad::Graph& g, const ParameterStore& params,
                                         const ad::Tensor& base) const;

  ForwardResult forward(ad::Graph& g, const ParameterStore& params,
                        const data::VideoRecord& video,
                        const ForwardOptions& options = {}) const;

 private:
  LayerOutput propose_layer(ad::Graph& g, const ParameterStore& params, std::size_t layer,
                            const ad::Tensor& map, const ForwardOptions& options,
                            std::vector<std::vector<int>>& runs) const;

  NetworkConfig config_;
};

// Channel-major input tensor [D, T] of a video.
ad::Tensor video_input(const data::VideoRecord& video);

}  // namespace gtan::network
