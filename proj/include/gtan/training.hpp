// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// Label assignment, foreground/background sampling, the three-part loss and
// SGD with momentum, plus the batch loop that ties them together.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gtan/autodiff.hpp"
#include "gtan/data.hpp"
#include "gtan/network.hpp"

namespace gtan::training {

enum class Role : std::uint8_t { kBackground, kForeground, kIgnored };

struct Assignment {
  std::vector<Role> roles;
  std::vector<int> matched;     // closest GT index, -1 without GTs
  std::vector<double> g_iou;    // IoU with the closest GT

  std::size_t count(Role role) const;
};

// IoU on clamped default boxes; closest GT is the argmax, ties to the earlier
// index. Foreground above `fg_threshold`, background below `bg_threshold`.
Assignment assign_labels(std::span<const network::Proposal> proposals,
                         std::span<const data::GroundTruthInstance> gts,
                         double fg_threshold = 0.8, double bg_threshold = 0.3);

// Keeps every foreground and draws round(bg_per_fg * n_fg) backgrounds
// uniformly without replacement (all of them when fewer exist). Returns
// ascending indices; empty when there is no foreground.
std::vector<std::size_t> sample_minibatch(std::span<const Role> roles, std::uint64_t seed,
                                          double bg_per_fg = 1.0);

struct LossConfig {
  double beta = 2.0;
  double gamma = 75.0;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
};

// Denominators of the mean reductions; batch-wide so per-video losses add up
// to the batch loss.
struct Normalizers {
  double selected = 0.0;
  double foreground = 0.0;
};

struct LossTerms {
  ad::Tensor total;  // undefined when nothing was selected
  double cls = 0.0;  // already divided by its normalizer
  double loc = 0.0;
  double ov = 0.0;
  std::size_t num_fg = 0;
  std::size_t num_bg = 0;

  double value(const LossConfig& config) const {
    return cls + config.beta * loc + config.gamma * ov;
  }
};

// L = L_cls + beta L_loc + gamma L_ov over the `selected` proposals of one
// video. Defaults normalize by this video's own counts.
LossTerms multitask_loss(ad::Graph& g, const network::ForwardResult& forward,
                         const Assignment& assignment, std::span<const std::size_t> selected,
                         std::span<const data::GroundTruthInstance> gts,
                         const network::NetworkConfig& net, const LossConfig& config,
                         std::optional<Normalizers> norm = std::nullopt);

struct SgdConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t decay_interval = 2500;
  double decay_factor = 0.9;

  void validate() const;
};

struct OptimizerState {
  SgdConfig config;
  std::vector<std::vector<double>> velocity;  // one buffer per parameter
  std::uint64_t step = 0;

  static OptimizerState create(const network::ParameterStore& store, SgdConfig config);
  double current_learning_rate() const;
};

// v <- momentum v + grad + wd w; w <- w - lr v; grads zeroed. Throws
// NumericError naming the parameter on a non-finite gradient.
void sgd_step(network::ParameterStore& store, OptimizerState& state);

struct TrainConfig {
  SgdConfig sgd;
  LossConfig loss;
  double fg_threshold = 0.8;
  double bg_threshold = 0.3;
  double bg_per_fg = 1.0;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

struct IterationLog {
  std::uint64_t iteration = 0;  // optimizer step, 1-based
  double loss = 0.0;
  double loss_cls = 0.0;
  double loss_loc = 0.0;
  double loss_ov = 0.0;
  double learning_rate = 0.0;
  std::size_t num_fg = 0;
  std::size_t num_bg = 0;
};

struct TrainProgress {
  std::uint64_t epoch = 0;          // completed epochs
  std::uint64_t skipped_steps = 0;  // batches without a foreground
};

// Order-independent 64-bit mixing used to derive per-epoch and per-step seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Video order of an epoch.
std::vector<std::size_t> epoch_order(std::size_t num_videos, std::uint64_t seed,
                                     std::uint64_t epoch);

class Trainer {
 public:
  using Callback = std::function<void(const IterationLog&)>;

  Trainer(const network::Network& net, network::ParameterStore& params, TrainConfig config,
          OptimizerState optimizer, TrainProgress progress = {});

  // One optimizer step on `batch`; nullopt when the batch had no foreground.
  std::optional<IterationLog> step(const data::Dataset& dataset,
                                   std::span<const std::size_t> batch);

  void run_epoch(const data::Dataset& dataset, const Callback& on_step = {});

  const OptimizerState& optimizer() const { return optimizer_; }
  const TrainProgress& progress() const { return progress_; }

 private:
  const network::Network& net_;
  network::ParameterStore& params_;
  TrainConfig config_;
  OptimizerState optimizer_;
  TrainProgress progress_;
  std::vector<network::ParameterStore> replicas_;
};

}  // namespace gtan::training
