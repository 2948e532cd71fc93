// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "finite_diff.hpp"
#include "gtan/autodiff.hpp"
#include "gtan/data.hpp"
#include "gtan/network.hpp"

namespace support {

namespace ad = gtan::ad;
namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("gtan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::vector<double> uniform_values(std::size_t n, std::uint64_t seed, double lo = -1.0,
                                          double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline ad::Tensor random_tensor(ad::Shape shape, std::uint64_t seed, bool requires_grad = true,
                                double lo = -1.0, double hi = 1.0) {
  const auto n = ad::numel(shape);
  return ad::Tensor::from_values(std::move(shape), uniform_values(n, seed, lo, hi), requires_grad);
}

// Scalar probe sum_i c_i x_i with fixed pseudo-random c, so every output
// coordinate reaches the loss with a distinct weight.
inline ad::Tensor probe(ad::Graph& g, const ad::Tensor& t) {
  const auto c = uniform_values(t.numel(), 0xC0FFEE + t.numel(), 0.5, 1.5);
  return ad::sum(g, ad::scale_by(g, t, c));
}

using Build = std::function<ad::Tensor(ad::Graph&, const std::vector<ad::Tensor>&)>;

struct GradReport {
  double max_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

// Backward vs central differences over every coordinate of every leaf.
// Coordinates whose +-h evaluation lands on another linear piece are skipped.
inline GradReport gradient_check(const Build& build, std::vector<ad::Tensor> leaves,
                                 double h = 1e-5) {
  GradReport rep;
  std::uint64_t base_sig = 0;
  {
    ad::Graph g;
    auto loss = build(g, leaves);
    base_sig = g.branch_signature();
    g.backward(loss);
  }
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    const std::vector<double> analytic(leaves[l].grad().begin(), leaves[l].grad().end());
    std::vector<double> x(leaves[l].values().begin(), leaves[l].values().end());
    for (std::size_t i = 0; i < x.size(); ++i) {
      bool kink = false;
      auto f = [&](const std::vector<double>& v) {
        std::vector<ad::Tensor> probe_leaves;
        for (std::size_t k = 0; k < leaves.size(); ++k) {
          probe_leaves.push_back(k == l ? ad::Tensor::from_values(leaves[k].shape(), v)
                                        : leaves[k].detach());
        }
        ad::Graph g(ad::Graph::Mode::kInference);
        const double y = build(g, probe_leaves).item();
        if (g.branch_signature() != base_sig) kink = true;
        return y;
      };
      const double fd = oracle::central_difference(f, x, i, h);
      if (kink) {
        ++rep.skipped;
        continue;
      }
      ++rep.checked;
      rep.max_error = std::max(rep.max_error, oracle::relative_error(analytic[i], fd));
    }
  }
  return rep;
}

inline gtan::network::NetworkConfig tiny_network(std::size_t dim, int classes,
                                                 std::size_t layers = 3) {
  gtan::network::NetworkConfig c;
  c.input_dim = dim;
  c.num_classes = classes;
  c.base_channels = 8;
  c.anchor_channels.assign(layers, 8);
  c.max_anchor_layers = layers;
  return c;
}

inline gtan::data::SyntheticSpec small_spec(std::size_t videos, std::uint64_t seed) {
  gtan::data::SyntheticSpec s;
  s.num_videos = videos;
  s.length = 32;
  s.dim = 4;
  s.num_classes = 2;
  s.min_instances = 1;
  s.max_instances = 2;
  s.min_width = 0.1;
  s.max_width = 0.5;
  s.snr = 3.0;
  s.seed = seed;
  return s;
}

}  // namespace support
