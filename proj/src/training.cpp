// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include "gtan/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>

#include "gtan/errors.hpp"
#include "gtan/parallel.hpp"

namespace gtan::training {

std::size_t Assignment::count(Role role) const {
  return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), role));
}

Assignment assign_labels(std::span<const network::Proposal> proposals,
                         std::span<const data::GroundTruthInstance> gts, double fg_threshold,
                         double bg_threshold) {
  Assignment a;
  a.roles.resize(proposals.size(), Role::kBackground);
  a.matched.assign(proposals.size(), -1);
  a.g_iou.assign(proposals.size(), 0.0);
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto box = proposals[i].box.extent();
    double best = -1.0;
    for (std::size_t k = 0; k < gts.size(); ++k) {
      const double iou = gaussian::segment_iou(box, gts[k].segment());
      if (iou > best) {
        best = iou;
        a.matched[i] = static_cast<int>(k);
      }
    }
    if (gts.empty()) continue;
    a.g_iou[i] = best;
    if (best > fg_threshold) {
      a.roles[i] = Role::kForeground;
    } else if (best < bg_threshold) {
      a.roles[i] = Role::kBackground;
    } else {
      a.roles[i] = Role::kIgnored;
    }
  }
  return a;
}

std::vector<std::size_t> sample_minibatch(std::span<const Role> roles, std::uint64_t seed,
                                          double bg_per_fg) {
  std::vector<std::size_t> fg, bg;
  for (std::size_t i = 0; i < roles.size(); ++i) {
    if (roles[i] == Role::kForeground) fg.push_back(i);
    if (roles[i] == Role::kBackground) bg.push_back(i);
  }
  if (fg.empty()) return {};
  const auto wanted = static_cast<std::size_t>(std::llround(bg_per_fg * static_cast<double>(fg.size())));
  const std::size_t take = std::min(wanted, bg.size());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, bg.size() - 1);
    std::swap(bg[i], bg[pick(rng)]);
  }
  std::vector<std::size_t> selected = std::move(fg);
  selected.insert(selected.end(), bg.begin(), bg.begin() + static_cast<std::ptrdiff_t>(take));
  std::sort(selected.begin(), selected.end());
  return selected;
}

LossTerms multitask_loss(ad::Graph& g, const network::ForwardResult& forward,
                         const Assignment& assignment, std::span<const std::size_t> selected,
                         std::span<const data::GroundTruthInstance> gts,
                         const network::NetworkConfig& net, const LossConfig& config,
                         std::optional<Normalizers> norm) {
  LossTerms terms;
  for (std::size_t i : selected) {
    if (assignment.roles.at(i) == Role::kForeground) ++terms.num_fg;
    else if (assignment.roles[i] == Role::kBackground) ++terms.num_bg;
    else throw ValidationError("an ignored proposal was selected for the loss");
  }
  if (selected.empty()) return terms;
  const Normalizers n = norm.value_or(Normalizers{static_cast<double>(selected.size()),
                                                  static_cast<double>(terms.num_fg)});
  const std::size_t C1 = static_cast<std::size_t>(net.num_classes) + 1;

  std::vector<ad::Tensor> cls_parts, loc_parts, ov_parts;
  for (std::size_t j = 0; j < forward.layers.size(); ++j) {
    const auto& layer = forward.layers[j];
    const std::size_t K = layer.kernels.size();
    std::vector<ad::CrossEntropyTerm> ce;
    std::vector<std::size_t> ov_idx;
    std::vector<double> ov_target;
    std::vector<std::size_t> fg_kernel, fg_dc, fg_dw;
    std::vector<double> fg_width_scale, fg_center, fg_gc, fg_gw;
    for (std::size_t i : selected) {
      const auto& p = forward.proposals[i];
      if (p.layer != static_cast<int>(j)) continue;
      const auto k = static_cast<std::size_t>(p.kernel);
      const auto r = static_cast<std::size_t>(p.ratio_index);
      const bool fg = assignment.roles[i] == Role::kForeground;
      const std::size_t target =
          fg ? static_cast<std::size_t>(gts[static_cast<std::size_t>(assignment.matched[i])].class_id)
             : C1 - 1;
      ce.push_back({r * C1, k, target, 1.0});
      ov_idx.push_back(r * K + k);
      ov_target.push_back(-assignment.g_iou[i]);
      if (fg) {
        const auto& gt = gts[static_cast<std::size_t>(assignment.matched[i])];
        fg_kernel.push_back(k);
        fg_dc.push_back(2 * r * K + k);
        fg_dw.push_back((2 * r + 1) * K + k);
        fg_width_scale.push_back(2.0 * net.ratios[r]);
        fg_center.push_back(layer.kernels[k].box_center);
        fg_gc.push_back(-gt.center);
        fg_gw.push_back(-gt.width);
      }
    }
    if (ce.empty()) continue;
    cls_parts.push_back(ad::softmax_cross_entropy(g, layer.cls, C1, ce));

    auto y_ov = ad::sigmoid(g, ad::gather(g, layer.overlap, ov_idx));
    ov_parts.push_back(ad::sum(g, ad::square(g, ad::add_const(g, y_ov, ov_target))));

    if (!fg_kernel.empty()) {
      auto a_w = ad::scale_by(g, ad::gather(g, layer.width_spreads, fg_kernel), fg_width_scale);
      auto dc = ad::gather(g, layer.loc, fg_dc);
      auto dw = ad::gather(g, layer.loc, fg_dw);
      auto phi_c = ad::add_const(g, ad::mul(g, ad::affine(g, a_w, config.alpha1, 0.0), dc), fg_center);
      auto phi_w = ad::mul(g, a_w, ad::exp(g, ad::affine(g, dw, config.alpha2, 0.0)));
      auto lc = ad::sum(g, ad::smooth_l1(g, ad::add_const(g, phi_c, fg_gc)));
      auto lw = ad::sum(g, ad::smooth_l1(g, ad::add_const(g, phi_w, fg_gw)));
      loc_parts.push_back(ad::add(g, lc, lw));
    }
  }

  auto total_of = [&](std::vector<ad::Tensor>& parts) {
    ad::Tensor t = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) t = ad::add(g, t, parts[i]);
    return t;
  };
  auto cls = ad::affine(g, total_of(cls_parts), 1.0 / n.selected, 0.0);
  auto ov = ad::affine(g, total_of(ov_parts), config.gamma / n.selected, 0.0);
  terms.cls = cls.item();
  terms.ov = ov.item() / config.gamma;
  terms.total = ad::add(g, cls, ov);
  if (!loc_parts.empty()) {
    if (!(n.foreground > 0.0)) throw ValidationError("foreground normalizer must be positive");
    auto loc = ad::affine(g, total_of(loc_parts), config.beta / n.foreground, 0.0);
    terms.loc = loc.item() / config.beta;
    terms.total = ad::add(g, terms.total, loc);
  }
  return terms;
}

// ---------------------------------------------------------------------- SGD

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight decay must be >= 0");
  if (decay_interval < 1) throw ValidationError("decay interval must be >= 1");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw ValidationError("decay factor must lie in (0, 1]");
  }
}

OptimizerState OptimizerState::create(const network::ParameterStore& store, SgdConfig config) {
  config.validate();
  OptimizerState s;
  s.config = config;
  for (const auto& p : store.entries()) s.velocity.emplace_back(p.tensor.numel(), 0.0);
  return s;
}

double OptimizerState::current_learning_rate() const {
  const auto decays = static_cast<double>(step / config.decay_interval);
  return config.learning_rate * std::pow(config.decay_factor, decays);
}

void sgd_step(network::ParameterStore& store, OptimizerState& state) {
  auto& entries = store.entries();
  if (state.velocity.size() != entries.size()) {
    throw ValidationError("optimizer state does not match the parameter store");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (double gr : entries[i].tensor.grad()) {
      if (!std::isfinite(gr)) {
        throw NumericError("non-finite gradient in parameter " + entries[i].name);
      }
    }
  }
  const double lr = state.current_learning_rate();
  const double mom = state.config.momentum;
  const double wd = state.config.weight_decay;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto w = entries[i].tensor.values_mut();
    auto gr = entries[i].tensor.grad_mut();
    auto& v = state.velocity[i];
    if (v.size() != w.size()) throw ValidationError("momentum buffer shape mismatch for " + entries[i].name);
    for (std::size_t k = 0; k < w.size(); ++k) {
      v[k] = mom * v[k] + gr[k] + wd * w[k];
      w[k] -= lr * v[k];
      gr[k] = 0.0;
    }
  }
  ++state.step;
}

// ------------------------------------------------------------------ Trainer

void TrainConfig::validate() const {
  sgd.validate();
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (workers < 1) throw ValidationError("workers must be >= 1");
  if (!(bg_threshold <= fg_threshold)) {
    throw ValidationError("background threshold must not exceed the foreground threshold");
  }
  if (!(bg_per_fg >= 0.0)) throw ValidationError("bg_per_fg must be >= 0");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(a ^ splitmix(b));
}

std::vector<std::size_t> epoch_order(std::size_t num_videos, std::uint64_t seed,
                                     std::uint64_t epoch) {
  std::vector<std::size_t> order(num_videos);
  for (std::size_t i = 0; i < num_videos; ++i) order[i] = i;
  std::mt19937_64 rng(mix_seed(seed, epoch));
  for (std::size_t i = num_videos; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}


Trainer::Trainer(const network::Network& net, network::ParameterStore& params, TrainConfig config,
                 OptimizerState optimizer, TrainProgress progress)
    : net_(net),
      params_(params),
      config_(std::move(config)),
      optimizer_(std::move(optimizer)),
      progress_(progress) {
  config_.validate();
}

std::optional<IterationLog> Trainer::step(const data::Dataset& dataset,
                                          std::span<const std::size_t> batch) {
  const std::size_t n = batch.size();
  const std::size_t workers = std::max<std::size_t>(1, std::min(config_.workers, n));
  while (replicas_.size() < workers) replicas_.push_back(params_.clone());
  for (std::size_t w = 0; w < workers; ++w) replicas_[w].copy_values_from(params_);

  struct VideoWork {
    std::unique_ptr<ad::Graph> graph;
    network::ForwardResult forward;
    Assignment assignment;
    std::vector<std::size_t> selected;
  };
  std::vector<VideoWork> work(n);
  parallel_for(workers, n, [&](std::size_t b, std::size_t w) {
    const auto& video = dataset.videos.at(batch[b]);
    auto& item = work[b];
    item.graph = std::make_unique<ad::Graph>();
    item.forward = net_.forward(*item.graph, replicas_[w], video);
    item.assignment = assign_labels(item.forward.proposals, video.annotations,
                                    config_.fg_threshold, config_.bg_threshold);
  });

  std::vector<Role> roles;
  std::vector<std::size_t> offsets;
  for (const auto& item : work) {
    offsets.push_back(roles.size());
    roles.insert(roles.end(), item.assignment.roles.begin(), item.assignment.roles.end());
  }
  const std::uint64_t iteration = optimizer_.step + progress_.skipped_steps;
  const auto selected = sample_minibatch(roles, mix_seed(config_.seed, iteration), config_.bg_per_fg);
  if (selected.empty()) {
    ++progress_.skipped_steps;
    return std::nullopt;
  }
  Normalizers norm;
  norm.selected = static_cast<double>(selected.size());
  for (std::size_t i : selected) {
    if (roles[i] == Role::kForeground) norm.foreground += 1.0;
  }
  for (std::size_t i : selected) {
    const auto b = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), i) - offsets.begin() - 1);
    work[b].selected.push_back(i - offsets[b]);
  }

  std::vector<std::vector<double>> grads(n);
  std::vector<LossTerms> losses(n);
  parallel_for(workers, n, [&](std::size_t b, std::size_t w) {
    auto& item = work[b];
    const auto& video = dataset.videos[batch[b]];
    auto& replica = replicas_[w];
    replica.zero_grad();
    losses[b] = multitask_loss(*item.graph, item.forward, item.assignment, item.selected,
                               video.annotations, net_.config(), config_.loss, norm);
    if (losses[b].total.defined()) {
      item.graph->backward(losses[b].total);
      auto& buffer = grads[b];
      for (const auto& p : replica.entries()) {
        buffer.insert(buffer.end(), p.tensor.grad().begin(), p.tensor.grad().end());
      }
    }
    item = VideoWork{};  // release the tape early
  });

  IterationLog log;
  auto& entries = params_.entries();
  for (std::size_t b = 0; b < n; ++b) {
    log.loss_cls += losses[b].cls;
    log.loss_loc += losses[b].loc;
    log.loss_ov += losses[b].ov;
    log.num_fg += losses[b].num_fg;
    log.num_bg += losses[b].num_bg;
    if (grads[b].empty()) continue;
    std::size_t offset = 0;
    for (auto& p : entries) {
      auto gr = p.tensor.grad_mut();
      for (std::size_t k = 0; k < gr.size(); ++k) gr[k] += grads[b][offset + k];
      offset += gr.size();
    }
  }
  log.loss = log.loss_cls + config_.loss.beta * log.loss_loc + config_.loss.gamma * log.loss_ov;
  log.learning_rate = optimizer_.current_learning_rate();
  sgd_step(params_, optimizer_);
  log.iteration = optimizer_.step;
  return log;
}

void Trainer::run_epoch(const data::Dataset& dataset, const Callback& on_step) {
  const auto order = epoch_order(dataset.videos.size(), config_.seed, progress_.epoch);
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    auto log = step(dataset, std::span(order).subspan(start, end - start));
    if (log && on_step) on_step(*log);
  }
  ++progress_.epoch;
}

}  // namespace gtan::training
