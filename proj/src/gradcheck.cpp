// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include "gtan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gtan/data.hpp"
#include "gtan/errors.hpp"
#include "gtan/network.hpp"
#include "gtan/training.hpp"

namespace gtan::gradcheck {

namespace {

struct Problem {
  network::Network net;
  data::VideoRecord video;
  network::Topology topology;
  training::Assignment assignment;
  std::vector<std::size_t> selected;
};

struct Evaluation {
  double loss = 0.0;
  std::uint64_t signature = 0;
};

Evaluation evaluate(const Problem& p, const network::ParameterStore& params,
                    const network::ForwardOptions& options) {
  ad::Graph g(ad::Graph::Mode::kInference);
  const auto fwd = p.net.forward(g, params, p.video, options);
  training::LossConfig lc;
  lc.alpha1 = p.net.config().alpha1;
  lc.alpha2 = p.net.config().alpha2;
  const auto terms = training::multitask_loss(g, fwd, p.assignment, p.selected,
                                              p.video.annotations, p.net.config(), lc);
  return {terms.total.item(), g.branch_signature()};
}

std::vector<double> analytic_gradient(const Problem& p, network::ParameterStore& params,
                                      const network::ForwardOptions& options) {
  params.zero_grad();
  ad::Graph g;
  const auto fwd = p.net.forward(g, params, p.video, options);
  training::LossConfig lc;
  lc.alpha1 = p.net.config().alpha1;
  lc.alpha2 = p.net.config().alpha2;
  const auto terms = training::multitask_loss(g, fwd, p.assignment, p.selected,
                                              p.video.annotations, p.net.config(), lc);
  g.backward(terms.total);
  std::vector<double> out;
  for (const auto& e : params.entries()) {
    out.insert(out.end(), e.tensor.grad().begin(), e.tensor.grad().end());
  }
  return out;
}

}  // namespace

GradcheckReport run(const GradcheckConfig& config) {
  if (!(config.step > 0.0)) throw ValidationError("gradcheck step must be positive");
  data::SyntheticSpec spec;
  spec.num_videos = 1;
  spec.length = config.length;
  spec.dim = config.dim;
  spec.num_classes = config.num_classes;
  spec.seed = config.seed;
  auto video = data::generate_synthetic(spec).videos.at(0);

  network::NetworkConfig nc;
  nc.input_dim = config.dim;
  nc.num_classes = config.num_classes;
  nc.base_channels = config.base_channels;
  nc.anchor_channels.assign(config.anchor_layers, config.anchor_channels);
  nc.max_anchor_layers = config.anchor_layers;
  nc.nominal_length = config.length;
  network::Network net(nc);

  // Random starting point: small random biases everywhere, random head
  // weights, spreads of about `spread_cells` cells that vary from cell to cell.
  auto params = net.init_parameters(config.seed);
  std::mt19937_64 rng(config.seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  const auto lengths = nc.layer_lengths(config.length);
  for (auto& e : params.entries()) {
    const bool sigma = e.name.find(".sigma.") != std::string::npos;
    if (e.name.ends_with(".bias")) {
      for (auto& v : e.tensor.values_mut()) v = small(rng);
      if (sigma) {
        const std::size_t j = std::stoul(e.name.substr(6, e.name.find('.') - 6)) - 1;
        const double s = std::min(0.45, config.spread_cells / static_cast<double>(lengths.at(j)));
        e.tensor.values_mut()[0] = std::log(s / (1.0 - s));
      }
    } else if (sigma) {
      for (auto& v : e.tensor.values_mut()) v = 0.5 * small(rng);
    } else if (e.name.starts_with("anchor") && e.name.find(".conv.") == std::string::npos) {
      // heads start near zero; give them full-size weights so every path
      // carries gradient
      for (auto& v : e.tensor.values_mut()) v = 3.0 * small(rng);
    }
  }

  // Ground truths copied from a few default boxes so that foregrounds exist
  // on every layer, including one on a mixed kernel when there is one.
  ad::Graph probe(ad::Graph::Mode::kInference);
  const auto start = net.forward(probe, params, video);
  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < start.proposals.size(); ++i) {
    const auto& pr = start.proposals[i];
    const auto& kernel = start.layers[static_cast<std::size_t>(pr.layer)].kernels[static_cast<std::size_t>(pr.kernel)];
    if (kernel.mixed() && pr.ratio_index == 0) {
      picks.push_back(i);
      break;
    }
  }
  for (std::size_t j = 0; j < start.layers.size(); ++j) {
    for (std::size_t i = 0; i < start.proposals.size(); ++i) {
      const auto& pr = start.proposals[i];
      if (pr.layer == static_cast<int>(j) && pr.kernel == static_cast<int>(start.layers[j].length / 3) &&
          pr.ratio_index == static_cast<int>(j % nc.ratios.size())) {
        picks.push_back(i);
      }
    }
  }
  video.annotations.clear();
  for (std::size_t n = 0; n < picks.size(); ++n) {
    const auto ext = start.proposals[picks[n]].box.extent();
    data::GroundTruthInstance gt;
    gt.center = ext.center();
    gt.width = ext.length();
    gt.class_id = static_cast<int>(n % static_cast<std::size_t>(config.num_classes));
    video.annotations.push_back(gt);
  }

  Problem p{net, video, start.topology, {}, {}};
  p.assignment = training::assign_labels(start.proposals, video.annotations);
  p.selected = training::sample_minibatch(p.assignment.roles, config.seed);
  if (p.selected.empty()) throw ValidationError("gradcheck problem has no foreground");

  GradcheckReport report;
  for (const auto& layer : start.layers) {
    for (const auto& k : layer.kernels) report.mixed_kernels += k.mixed() ? 1 : 0;
  }
  for (auto i : p.selected) {
    if (p.assignment.roles[i] == training::Role::kForeground) ++report.num_fg;
    else ++report.num_bg;
  }

  struct Variant {
    const char* suffix;
    network::ForwardOptions options;
    bool spreads_only;
  };
  std::vector<Variant> variants(3);
  variants[0] = {"", {}, false};
  variants[1] = {" [pooling path]", {}, true};
  // Spread values at the starting point, held fixed on the path not checked.
  std::vector<std::vector<double>> base_spreads;
  for (const auto& layer : start.layers) {
    base_spreads.emplace_back(layer.width_spreads.values().begin(), layer.width_spreads.values().end());
  }
  variants[1].options.fixed_width_spreads = &base_spreads;
  variants[2] = {" [width path]", {}, true};
  variants[2].options.fixed_pool_spreads = &base_spreads;

  const double h = config.step;
  for (auto& variant : variants) {
    variant.options.topology = &p.topology;
    const auto grad = analytic_gradient(p, params, variant.options);
    const auto base = evaluate(p, params, variant.options);
    std::size_t offset = 0;
    for (auto& e : params.entries()) {
      const std::size_t n = e.tensor.numel();
      const bool is_sigma = e.name.find(".sigma.") != std::string::npos;
      if (variant.spreads_only && !is_sigma) {
        offset += n;
        continue;
      }
      GroupResult group{e.name + variant.suffix};
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      auto values = e.tensor.values_mut();
      for (std::size_t idx : order) {
        if (group.checked >= config.coords_per_tensor) break;
        const double x = values[idx];
        values[idx] = x + h;
        const auto plus = evaluate(p, params, variant.options);
        values[idx] = x - h;
        const auto minus = evaluate(p, params, variant.options);
        values[idx] = x;
        if (plus.signature != base.signature || minus.signature != base.signature) {
          ++group.skipped;
          continue;
        }
        const double fd = (plus.loss - minus.loss) / (2.0 * h);
        const double ga = grad[offset + idx];
        const double err = std::abs(ga - fd) / std::max({1.0, std::abs(ga), std::abs(fd)});
        group.max_error = std::max(group.max_error, err);
        ++group.checked;
      }
      report.max_error = std::max(report.max_error, group.max_error);
      report.groups.push_back(std::move(group));
      offset += n;
    }
  }
  params.zero_grad();
  report.passed = report.max_error < config.tolerance;
  for (const auto& gr : report.groups) {
    if (gr.checked == 0) report.passed = false;
  }
  return report;
}

}  // namespace gtan::gradcheck
