// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "gtan/autodiff.hpp"
#include "gtan/errors.hpp"
#include "support.hpp"

namespace ad = gtan::ad;
using support::random_tensor;

namespace {

std::vector<double> values_of(const ad::Tensor& t) { return {t.values().begin(), t.values().end()}; }

ad::Tensor leaf(ad::Shape shape, std::vector<double> v, bool grad = false) {
  return ad::Tensor::from_values(std::move(shape), std::move(v), grad);
}

}  // namespace

TEST_CASE("conv1d hand values") {
  ad::Graph g;
  auto x = leaf({1, 3}, {1, 2, 3});
  auto id = ad::conv1d(g, x, leaf({1, 1, 3}, {0, 1, 0}), leaf({1}, {0}), 1, 1);
  CHECK(values_of(id) == std::vector<double>{1, 2, 3});

  auto ones = ad::conv1d(g, leaf({1, 4}, {1, 1, 1, 1}), leaf({1, 1, 3}, {1, 1, 1}), leaf({1}, {0}),
                         2, 1);
  CHECK(ones.shape() == ad::Shape{1, 2});
  CHECK(values_of(ones) == std::vector<double>{2, 3});

  auto five = ad::conv1d(g, random_tensor({3, 7}, 1, false), ad::Tensor::zeros({2, 3, 3}),
                         leaf({2}, {5, 5}), 1, 1);
  for (double v : five.values()) CHECK(v == 5.0);
}

TEST_CASE("conv1d geometry and shape errors") {
  ad::Graph g;
  auto x = random_tensor({2, 5}, 2, false);
  CHECK(ad::conv1d(g, x, ad::Tensor::zeros({4, 2, 3}), ad::Tensor::zeros({4}), 2, 1).shape() ==
        ad::Shape{4, 3});
  CHECK_THROWS_AS(ad::conv1d(g, x, ad::Tensor::zeros({4, 3, 3}), ad::Tensor::zeros({4}), 1, 1),
                  gtan::DimensionError);
  CHECK_THROWS_AS(ad::conv1d(g, x, ad::Tensor::zeros({4, 2, 3}), ad::Tensor::zeros({3}), 1, 1),
                  gtan::DimensionError);
  CHECK_THROWS_AS(ad::conv1d(g, random_tensor({1, 1}, 3, false), ad::Tensor::zeros({1, 1, 3}),
                             ad::Tensor::zeros({1}), 1, 0),
                  gtan::GeometryError);
  CHECK_THROWS_AS(ad::window_output_length(4, 0, 1, 0), gtan::GeometryError);
}

TEST_CASE("maxpool1d windows and tie rule") {
  ad::Graph g;
  auto p = ad::maxpool1d(g, leaf({1, 4}, {1, 3, 2, 5}), 3, 2, 1);
  CHECK(values_of(p) == std::vector<double>{3, 5});

  auto mono = leaf({1, 5}, {-2, -1, 0, 4, 9});
  CHECK(values_of(ad::maxpool1d(g, mono, 1, 1, 0)) == values_of(mono));

  ad::Graph h;
  auto flat = leaf({1, 4}, {4, 4, 4, 4}, true);
  auto out = ad::maxpool1d(h, flat, 2, 2, 0);
  CHECK(values_of(out) == std::vector<double>{4, 4});
  h.backward(ad::sum(h, out));
  CHECK(std::vector<double>(flat.grad().begin(), flat.grad().end()) ==
        std::vector<double>{1, 0, 1, 0});

  CHECK_THROWS_AS(ad::maxpool1d(g, leaf({1, 2}, {1, 2}), 5, 1, 0), gtan::GeometryError);
}

TEST_CASE("pointwise values and derivatives") {
  ad::Graph g;
  CHECK(ad::sigmoid(g, ad::Tensor::scalar(0.0)).item() == 0.5);
  CHECK(ad::exp(g, ad::Tensor::scalar(1.0)).item() == doctest::Approx(std::numbers::e).epsilon(1e-15));
  CHECK(ad::square(g, ad::Tensor::scalar(-3.0)).item() == 9.0);

  ad::Graph h;
  auto x = ad::Tensor::scalar(-2.0, true);
  auto y = ad::relu(h, x);
  CHECK(y.item() == 0.0);
  h.backward(y);
  CHECK(x.grad()[0] == 0.0);

  ad::Graph k;
  CHECK_THROWS_AS(ad::exp(k, ad::Tensor::scalar(1000.0)), gtan::NumericError);
}

TEST_CASE("softmax values") {
  ad::Graph g;
  const auto third = ad::softmax(g, leaf({3}, {0, 0, 0}));
  for (double v : third.values()) CHECK(v == doctest::Approx(1.0 / 3.0));
  auto p = values_of(ad::softmax(g, leaf({2}, {1, 2})));
  CHECK(p[0] == doctest::Approx(0.2689414213699951).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.7310585786300049).epsilon(1e-14));
  auto shifted = values_of(ad::softmax(g, leaf({2}, {1 + 37.5, 2 + 37.5})));
  CHECK(shifted[0] == doctest::Approx(p[0]).epsilon(1e-14));
  CHECK(shifted[1] == doctest::Approx(p[1]).epsilon(1e-14));
}

TEST_CASE("softmax sums to one for bounded inputs") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t n = 1 + seed % 17;
    ad::Graph g;
    auto s = ad::softmax(g, random_tensor({n}, seed, false, -50.0, 50.0));
    double total = 0.0;
    for (double v : s.values()) {
      CHECK(v > 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("reduce_weighted_sum") {
  ad::Graph g;
  auto f = leaf({3, 2}, {1, 2, 3, 4, 5, 6});
  CHECK(values_of(ad::reduce_weighted_sum(g, f, leaf({3}, {0, 1, 0}))) == std::vector<double>{3, 4});
  auto mean = values_of(ad::reduce_weighted_sum(g, f, leaf({3}, {1.0 / 3, 1.0 / 3, 1.0 / 3})));
  CHECK(mean[0] == doctest::Approx(3.0));
  CHECK(mean[1] == doctest::Approx(4.0));
  CHECK(values_of(ad::reduce_weighted_sum(g, leaf({2, 2}, {1, 0, 0, 1}), leaf({2}, {0.25, 0.75}))) ==
        std::vector<double>{0.25, 0.75});
  CHECK_THROWS_AS(ad::reduce_weighted_sum(g, f, leaf({2}, {1, 1})), gtan::DimensionError);

  // gradients reach both operands
  ad::Graph h;
  auto feats = random_tensor({4, 3}, 5);
  auto w = random_tensor({4}, 6);
  h.backward(support::probe(h, ad::reduce_weighted_sum(h, feats, w)));
  double gf = 0.0, gw = 0.0;
  for (double v : feats.grad()) gf += std::abs(v);
  for (double v : w.grad()) gw += std::abs(v);
  CHECK(gf > 0.0);
  CHECK(gw > 0.0);
}

TEST_CASE("backward basics") {
  {
    ad::Graph g;
    auto x = random_tensor({5}, 1);
    g.backward(ad::sum(g, x));
    for (double v : x.grad()) CHECK(v == 1.0);
  }
  {
    ad::Graph g;
    auto x = leaf({2}, {1, 2}, true);
    g.backward(ad::sum(g, ad::square(g, x)));
    CHECK(values_of(x) == std::vector<double>{1, 2});
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{2, 4});
  }
  {
    // fan-out accumulates
    ad::Graph g;
    auto x = random_tensor({3}, 2);
    g.backward(ad::add(g, ad::sum(g, x), ad::sum(g, ad::affine(g, x, 2.0, 1.0))));
    for (double v : x.grad()) CHECK(v == 3.0);
  }
}

TEST_CASE("backward errors") {
  ad::Graph g;
  auto x = random_tensor({3}, 3);
  auto y = ad::square(g, x);
  CHECK_THROWS_AS(g.backward(y), gtan::GraphError);
  CHECK_THROWS_AS(g.backward(ad::Tensor::scalar(1.0)), gtan::GraphError);
  ad::Graph other;
  auto z = ad::sum(other, random_tensor({2}, 4));
  CHECK_THROWS_AS(g.backward(z), gtan::GraphError);
  auto loss = ad::sum(g, y);
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), gtan::GraphError);
}

TEST_CASE("composite gradient matches central differences") {
  auto build = [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
    auto h = ad::conv1d(g, p[0], p[1], p[2], 1, 1);
    h = ad::sigmoid(g, h);
    auto s = ad::softmax(g, ad::reshape(g, h, {h.numel()}));
    auto e = ad::exp(g, ad::affine(g, s, 3.0, 0.0));
    return ad::sum(g, ad::mul(g, e, e));
  };
  auto rep = support::gradient_check(
      build, {random_tensor({2, 6}, 10), random_tensor({3, 2, 3}, 11), random_tensor({3}, 12)});
  CHECK(rep.skipped == 0);
  CHECK(rep.checked == 12 + 18 + 3);
  CHECK(rep.max_error < 1e-6);
}

TEST_CASE("every primitive passes the gradient oracle") {
  using B = support::Build;
  struct Case {
    const char* name;
    B build;
    std::vector<ad::Tensor> leaves;
  };
  const std::vector<std::size_t> idx = {3, 0, 7, 3, 11, 5};
  const std::vector<double> c12 = support::uniform_values(12, 99);
  const std::vector<ad::CrossEntropyTerm> terms = {{0, 1, 2, 1.0}, {3, 0, 0, 0.5}, {0, 4, 1, 2.0},
                                                   {3, 4, 2, 1.0}};
  std::vector<Case> cases = {
      {"conv1d", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::conv1d(g, p[0], p[1], p[2], 2, 1)); },
       {random_tensor({3, 11}, 1), random_tensor({4, 3, 3}, 2), random_tensor({4}, 3)}},
      {"maxpool1d", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::maxpool1d(g, p[0], 3, 2, 1)); },
       {random_tensor({3, 12}, 4)}},
      {"sigmoid", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::sigmoid(g, p[0])); }, {random_tensor({12}, 5, true, -4, 4)}},
      {"relu", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::relu(g, p[0])); }, {random_tensor({12}, 6)}},
      {"exp", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::exp(g, p[0])); }, {random_tensor({12}, 7, true, -3, 3)}},
      {"square", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::square(g, p[0])); }, {random_tensor({12}, 8)}},
      {"smooth_l1", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::smooth_l1(g, p[0])); }, {random_tensor({12}, 9, true, -3, 3)}},
      {"softmax", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::softmax(g, p[0])); }, {random_tensor({9}, 10, true, -5, 5)}},
      {"reduce_weighted_sum", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::reduce_weighted_sum(g, p[0], p[1])); },
       {random_tensor({6, 4}, 11), random_tensor({3, 6}, 12)}},
      {"transpose_reshape", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::reshape(g, ad::transpose(g, p[0]), {2, 6})); },
       {random_tensor({4, 3}, 13)}},
      {"gather", [idx](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::gather(g, p[0], idx)); }, {random_tensor({12}, 14)}},
      {"concat", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         std::vector<ad::Tensor> parts = {p[0], p[1]};
         return support::probe(g, ad::concat(g, parts)); },
       {random_tensor({5}, 15), random_tensor({4}, 16)}},
      {"add_sub_mul", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::mul(g, ad::add(g, p[0], p[1]), ad::sub(g, p[0], p[1]))); },
       {random_tensor({7}, 17), random_tensor({7}, 18)}},
      {"minimum_maximum", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return ad::add(g, support::probe(g, ad::minimum(g, p[0], p[1])),
                        support::probe(g, ad::square(g, ad::maximum(g, p[0], p[1])))); },
       {random_tensor({9}, 19), random_tensor({9}, 20)}},
      {"affine_add_const_scale_by", [c12](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         auto y = ad::add_const(g, ad::affine(g, p[0], -1.5, 0.25), c12);
         return support::probe(g, ad::square(g, ad::scale_by(g, y, c12))); },
       {random_tensor({12}, 21)}},
      {"clamp", [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return support::probe(g, ad::square(g, ad::clamp(g, p[0], -0.5, 0.5))); },
       {random_tensor({12}, 22)}},
      {"softmax_cross_entropy", [terms](ad::Graph& g, const std::vector<ad::Tensor>& p) {
         return ad::softmax_cross_entropy(g, p[0], 3, terms); },
       {random_tensor({6, 5}, 23, true, -3, 3)}},
  };
  for (auto& c : cases) {
    CAPTURE(c.name);
    const auto rep = support::gradient_check(c.build, c.leaves);
    std::size_t coords = 0;
    for (const auto& t : c.leaves) coords += t.numel();
    CHECK(rep.checked + rep.skipped == coords);
    CHECK(rep.checked >= coords * 9 / 10);
    CHECK(rep.max_error < 1e-6);
  }
}

TEST_CASE("conv1d is linear in its input") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ad::Graph g;
    auto w = random_tensor({3, 2, 3}, seed, false);
    auto b = ad::Tensor::zeros({3});
    auto x = random_tensor({2, 9}, seed + 100, false);
    auto y = random_tensor({2, 9}, seed + 200, false);
    const double alpha = 0.5 + static_cast<double>(seed) / 10.0, beta = -1.25;
    auto mix = ad::add(g, ad::affine(g, x, alpha, 0.0), ad::affine(g, y, beta, 0.0));
    auto lhs = ad::conv1d(g, mix, w, b, 2, 1);
    auto rhs = ad::add(g, ad::affine(g, ad::conv1d(g, x, w, b, 2, 1), alpha, 0.0),
                       ad::affine(g, ad::conv1d(g, y, w, b, 2, 1), beta, 0.0));
    for (std::size_t i = 0; i < lhs.numel(); ++i) CHECK(std::abs(lhs.at(i) - rhs.at(i)) < 1e-10);
  }
}

TEST_CASE("forward and backward are bit-identical across runs") {
  auto run = [] {
    ad::Graph g;
    auto x = random_tensor({2, 10}, 42);
    auto w = random_tensor({4, 2, 3}, 43);
    auto y = ad::maxpool1d(g, ad::relu(g, ad::conv1d(g, x, w, random_tensor({4}, 44), 1, 1)), 3, 2, 1);
    auto loss = support::probe(g, ad::softmax(g, ad::reshape(g, y, {y.numel()})));
    g.backward(loss);
    std::vector<double> out = {loss.item()};
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("corrupted backward rule is caught by the oracle") {
  auto build = [](ad::Graph& g, const std::vector<ad::Tensor>& p) {
    return support::probe(g, ad::softmax(g, p[0]));
  };
  std::vector<ad::Tensor> leaves = {random_tensor({6}, 3, true, -2, 2)};
  ad::debug::corrupt_backward("softmax");
  const auto bad = support::gradient_check(build, leaves);
  ad::debug::clear_corruption();
  leaves[0].zero_grad();
  const auto good = support::gradient_check(build, leaves);
  CHECK(bad.max_error > 1e-3);
  CHECK(good.max_error < 1e-6);
}
