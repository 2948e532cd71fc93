// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include "gtan/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gtan/errors.hpp"

namespace gtan::network {

namespace {

std::string layer_name(std::size_t layer, const char* part) {
  return "anchor" + std::to_string(layer + 1) + "." + part;
}

// Prediction heads start near zero: with full-size random heads the initial
// offsets move every default box by a sizeable fraction of its width, and
// the spread head collapses chasing them before the heads settle.
constexpr double kHeadInitScale = 0.01;

bool is_head(const std::string& name) {
  return name.find(".cls.") != std::string::npos || name.find(".loc.") != std::string::npos ||
         name.find(".ov.") != std::string::npos;
}

void he_uniform(ad::Tensor& w, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& x : w.values_mut()) x = dist(rng);
}

}  // namespace

std::vector<double> default_ratios() {
  return {1.0, std::cbrt(2.0), std::cbrt(4.0)};
}

void NetworkConfig::validate() const {
  if (input_dim < 1) throw ValidationError("network input_dim must be >= 1");
  if (num_classes < 1) throw ValidationError("network num_classes must be >= 1");
  if (anchor_channels.empty() || max_anchor_layers < 1) {
    throw ValidationError("network needs at least one anchor layer");
  }
  for (auto c : anchor_channels) {
    if (c < 1) throw ValidationError("anchor channel widths must be >= 1");
  }
  if (anchor_kernel < 1 || anchor_stride < 1) {
    throw ValidationError("anchor kernel and stride must be >= 1");
  }
  if (channel_divisor < 1) throw ValidationError("channel_divisor must be >= 1");
  if (ratios.empty()) throw ValidationError("at least one scale ratio is required");
  for (double r : ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("scale ratios must be positive");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must lie in [0, 1]");
  if (!std::isfinite(alpha1) || !std::isfinite(alpha2)) {
    throw ValidationError("alpha1/alpha2 must be finite");
  }
  if (nominal_length != 0 && nominal_length < data::kMinVideoLength) {
    throw ValidationError("nominal_length must be 0 or >= 16");
  }
}

std::size_t NetworkConfig::effective_base_channels() const {
  return base_channels != 0 ? base_channels : std::min<std::size_t>(512, 4 * input_dim);
}

std::size_t NetworkConfig::layer_channels(std::size_t layer) const {
  return std::max<std::size_t>(1, anchor_channels.at(layer) / channel_divisor);
}

std::vector<std::size_t> NetworkConfig::layer_lengths(std::size_t length) const {
  const std::size_t cap = std::min(max_anchor_layers, anchor_channels.size());
  std::size_t t = ad::window_output_length(length, 3, 2, 1);  // pool1
  std::vector<std::size_t> lengths;
  const std::size_t pad = anchor_kernel / 2;
  while (lengths.size() < cap && t > 1) {
    t = ad::window_output_length(t, anchor_kernel, anchor_stride, pad);
    lengths.push_back(t);
  }
  return lengths;
}

std::size_t NetworkConfig::parameter_depth() const {
  if (nominal_length == 0) return std::min(max_anchor_layers, anchor_channels.size());
  return layer_lengths(nominal_length).size();
}

// ------------------------------------------------------------ ParameterStore

ad::Tensor& ParameterStore::add(std::string name, ad::Shape shape) {
  if (contains(name)) throw ValidationError("duplicate parameter name " + name);
  entries_.push_back({std::move(name), ad::Tensor::zeros(std::move(shape), true)});
  return entries_.back().tensor;
}

const ad::Tensor& ParameterStore::get(std::string_view name) const {
  for (const auto& p : entries_) {
    if (p.name == name) return p.tensor;
  }
  throw ValidationError("unknown parameter " + std::string(name));
}

bool ParameterStore::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Parameter& p) { return p.name == name; });
}

std::size_t ParameterStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : entries_) n += p.tensor.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : entries_) p.tensor.zero_grad();
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out;
  for (const auto& p : entries_) {
    auto& t = out.add(p.name, p.tensor.shape());
    std::copy(p.tensor.values().begin(), p.tensor.values().end(), t.values_mut().begin());
  }
  return out;
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.entries_.size() != entries_.size()) {
    throw ValidationError("parameter stores differ in size");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& src = other.entries_[i];
    auto& dst = entries_[i];
    if (src.name != dst.name || src.tensor.shape() != dst.tensor.shape()) {
      throw ValidationError("parameter " + dst.name + " does not match " + src.name);
    }
    std::copy(src.tensor.values().begin(), src.tensor.values().end(),
              dst.tensor.values_mut().begin());
  }
}

// --------------------------------------------------------------- proposals

Refined refine(const gaussian::DefaultBox& box, double delta_c, double delta_w, double alpha1,
               double alpha2) {
  return {box.center + alpha1 * box.width * delta_c, box.width * std::exp(alpha2 * delta_w)};
}

double Proposal::overlap() const { return 1.0 / (1.0 + std::exp(-overlap_logit)); }

ad::Tensor video_input(const data::VideoRecord& video) {
  std::vector<double> v(video.dim * video.length);
  for (std::size_t t = 0; t < video.length; ++t) {
    for (std::size_t d = 0; d < video.dim; ++d) v[d * video.length + t] = video.at(t, d);
  }
  return ad::Tensor::from_values({video.dim, video.length}, std::move(v));
}

// ------------------------------------------------------------------ Network

Network::Network(NetworkConfig config) : config_(std::move(config)) { config_.validate(); }

std::vector<std::pair<std::string, ad::Shape>> Network::parameter_layout() const {
  std::vector<std::pair<std::string, ad::Shape>> layout;
  const std::size_t B = config_.effective_base_channels();
  const std::size_t R = config_.num_ratios();
  const std::size_t C1 = static_cast<std::size_t>(config_.num_classes) + 1;
  auto conv = [&](const std::string& prefix, std::size_t out, std::size_t in, std::size_t k) {
    layout.emplace_back(prefix + ".weight", ad::Shape{out, in, k});
    layout.emplace_back(prefix + ".bias", ad::Shape{out});
  };
  conv("base.conv1", B, config_.input_dim, 3);
  conv("base.conv2", B, B, 3);
  std::size_t in = B;
  for (std::size_t j = 0; j < config_.parameter_depth(); ++j) {
    const std::size_t c = config_.layer_channels(j);
    conv(layer_name(j, "conv"), c, in, config_.anchor_kernel);
    if (!config_.fixed_scale) conv(layer_name(j, "sigma"), 1, c, 3);
    conv(layer_name(j, "cls"), R * C1, c, 1);
    conv(layer_name(j, "loc"), 2 * R, c, 1);
    conv(layer_name(j, "ov"), R, c, 1);
    in = c;
  }
  return layout;
}

ParameterStore Network::init_parameters(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  const std::size_t depth = config_.parameter_depth();
  // Layer lengths for the sigma bias; without a nominal length assume the
  // layers halve down to a single cell.
  std::vector<std::size_t> lengths;
  if (config_.nominal_length != 0) {
    lengths = config_.layer_lengths(config_.nominal_length);
  } else {
    for (std::size_t j = 0; j < depth; ++j) lengths.push_back(std::size_t{1} << (depth - j - 1));
  }

  ParameterStore store;
  for (auto& [name, shape] : parameter_layout()) {
    const bool sigma = name.find(".sigma.") != std::string::npos;
    const bool weight = name.ends_with(".weight");
    auto& t = store.add(name, shape);
    if (sigma && !weight) {
      const std::size_t j = std::stoul(name.substr(6, name.find('.') - 6)) - 1;
      t.values_mut()[0] = gaussian::initial_sigma_bias(lengths[j]);
    } else if (weight && !sigma) {
      he_uniform(t, shape[1] * shape[2], rng);
      if (is_head(name)) {
        for (auto& v : t.values_mut()) v *= kHeadInitScale;
      }
    }
  }
  return store;
}

ad::Tensor Network::base_forward(ad::Graph& g, const ParameterStore& params,
                                 const ad::Tensor& features) const {
  if (features.rank() != 2 || features.dim(0) != config_.input_dim) {
    throw DimensionError("network input must be [" + std::to_string(config_.input_dim) +
                         ", T], got " + ad::to_string(features.shape()));
  }
  if (features.dim(1) < data::kMinVideoLength) {
    throw GeometryError("input of " + std::to_string(features.dim(1)) +
                        " clips is shorter than 16");
  }
  auto x = ad::conv1d(g, features, params.get("base.conv1.weight"), params.get("base.conv1.bias"),
                      1, 1);
  x = ad::relu(g, x);
  x = ad::conv1d(g, x, params.get("base.conv2.weight"), params.get("base.conv2.bias"), 1, 1);
  x = ad::relu(g, x);
  return ad::maxpool1d(g, x, 3, 2, 1);
}

std::vector<ad::Tensor> Network::anchor_forward(ad::Graph& g, const ParameterStore& params,
                                                const ad::Tensor& base) const {
  std::size_t depth = std::min(config_.parameter_depth(), config_.max_anchor_layers);
  std::vector<ad::Tensor> maps;
  ad::Tensor x = base;
  const std::size_t pad = config_.anchor_kernel / 2;
  for (std::size_t j = 0; j < depth && x.dim(1) > 1; ++j) {
    x = ad::conv1d(g, x, params.get(layer_name(j, "conv.weight")),
                   params.get(layer_name(j, "conv.bias")), config_.anchor_stride, pad);
    x = ad::relu(g, x);
    maps.push_back(x);
  }
  if (maps.empty()) throw GeometryError("input too short for any anchor layer");
  return maps;
}

LayerOutput Network::propose_layer(ad::Graph& g, const ParameterStore& params, std::size_t j,
                                   const ad::Tensor& map, const ForwardOptions& options,
                                   std::vector<std::vector<int>>& runs) const {
  LayerOutput out;
  out.map = map;
  out.length = map.dim(1);
  const std::size_t T = out.length;
  const double Td = static_cast<double>(T);

  if (config_.fixed_scale) {
    out.cell_spreads = ad::Tensor::full({T}, 0.5 / Td);
  } else {
    out.cell_spreads = gaussian::sigma_from_features(g, map, params.get(layer_name(j, "sigma.weight")),
                                                     params.get(layer_name(j, "sigma.bias")));
  }
  std::vector<gaussian::GaussianKernel> cells;
  cells.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    cells.push_back(gaussian::cell_kernel(static_cast<int>(t), T, out.cell_spreads.at(t)));
  }
  if (options.topology != nullptr) {
    if (j >= options.topology->runs.size()) throw ValidationError("topology has too few layers");
    runs = options.topology->runs[j];
  } else if (config_.gaussian_grouping) {
    runs = gaussian::grouping_runs(cells, config_.epsilon, T);
  } else {
    runs.clear();
  }
  auto mixed = gaussian::build_mixed(g, cells, out.cell_spreads, runs, T);

  std::vector<ad::Tensor> spread_parts = {out.cell_spreads};
  std::vector<double> mus;
  for (const auto& k : cells) mus.push_back(k.mu);
  for (auto& k : mixed) {
    spread_parts.push_back(k.spread_node);
    mus.push_back(k.mu);
  }
  out.kernels = std::move(cells);
  out.kernels.insert(out.kernels.end(), std::make_move_iterator(mixed.begin()),
                     std::make_move_iterator(mixed.end()));
  const std::size_t K = out.kernels.size();
  ad::Tensor spreads = spread_parts.size() == 1 ? out.cell_spreads : ad::concat(g, spread_parts);
  auto fixed_or = [&](const std::vector<std::vector<double>>* fixed) {
    if (fixed == nullptr) return spreads;
    const auto& v = fixed->at(j);
    if (v.size() != K) throw DimensionError("fixed spreads do not match the kernel count");
    return ad::Tensor::from_values({K}, v, false);
  };
  out.width_spreads = fixed_or(options.fixed_width_spreads);
  out.pool_spreads = fixed_or(options.fixed_pool_spreads);

  const ad::Tensor time_major = ad::transpose(g, map);
  if (config_.fixed_scale) {
    // Each cell keeps its own feature; mixed kernels (if any) still pool.
    if (K == T) {
      out.pooled = time_major;
    } else {
      std::vector<std::size_t> idx(K - T);
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = T + i;
      auto extra = ad::gather(g, out.pool_spreads, idx);
      auto mixed_pool = gaussian::gaussian_pool(g, time_major, extra,
                                                std::span(mus).subspan(T));
      std::vector<ad::Tensor> rows = {time_major, mixed_pool};
      out.pooled = ad::reshape(g, ad::concat(g, rows), {K, map.dim(0)});
    }
  } else {
    out.pooled = gaussian::gaussian_pool(g, time_major, out.pool_spreads, mus);
  }

  const ad::Tensor x = ad::transpose(g, out.pooled);  // [D_j, K]
  auto head = [&](const char* part) {
    const std::string p = part;
    return ad::conv1d(g, x, params.get(layer_name(j, (p + ".weight").c_str())),
                      params.get(layer_name(j, (p + ".bias").c_str())), 1, 0);
  };
  out.cls = head("cls");
  out.loc = head("loc");
  out.overlap = head("ov");
  return out;
}

ForwardResult Network::forward(ad::Graph& g, const ParameterStore& params,
                               const data::VideoRecord& video,
                               const ForwardOptions& options) const {
  ForwardResult result;
  const auto base = base_forward(g, params, video_input(video));
  const auto maps = anchor_forward(g, params, base);
  const std::size_t R = config_.num_ratios();
  const std::size_t C1 = static_cast<std::size_t>(config_.num_classes) + 1;

  for (std::size_t j = 0; j < maps.size(); ++j) {
    std::vector<std::vector<int>> runs;
    auto layer = propose_layer(g, params, j, maps[j], options, runs);
    result.topology.runs.push_back(std::move(runs));

    const std::size_t K = layer.kernels.size();
    const auto cls = layer.cls.values();
    const auto loc = layer.loc.values();
    const auto ov = layer.overlap.values();
    for (std::size_t k = 0; k < K; ++k) {
      gaussian::GaussianKernel kernel = layer.kernels[k];
      kernel.spread = layer.width_spreads.at(k);
      for (std::size_t r = 0; r < R; ++r) {
        Proposal p;
        p.layer = static_cast<int>(j);
        p.kernel = static_cast<int>(k);
        p.ratio_index = static_cast<int>(r);
        p.box = gaussian::default_box(kernel, config_.ratios[r], static_cast<int>(r));
        p.class_logits.resize(C1);
        for (std::size_t c = 0; c < C1; ++c) p.class_logits[c] = cls[(r * C1 + c) * K + k];
        p.delta_c = loc[(2 * r) * K + k];
        p.delta_w = loc[(2 * r + 1) * K + k];
        p.overlap_logit = ov[r * K + k];
        result.proposals.push_back(std::move(p));
      }
    }
    result.layers.push_back(std::move(layer));
  }
  return result;
}

}  // namespace gtan::network
