// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include "gtan/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include "gtan/errors.hpp"

namespace gtan::ad {

namespace {

std::atomic<std::uint64_t> g_next_graph_id{1};

struct Corruption {
  std::mutex mu;
  std::string op;
  std::atomic<bool> active{false};
};

Corruption& corruption() {
  static Corruption c;
  return c;
}

bool is_corrupted(const char* op) {
  auto& c = corruption();
  if (!c.active.load(std::memory_order_relaxed)) return false;
  std::lock_guard lock(c.mu);
  return c.op == op;
}

void check_finite(const char* op, std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (!t.defined()) throw DimensionError(std::string(op) + ": undefined tensor");
  if (t.rank() != rank) {
    std::ostringstream os;
    os << op << ": expected rank " << rank << ", got shape " << to_string(t.shape());
    throw DimensionError(os.str());
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                         " vs " + to_string(b.shape()));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------- Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = ad::numel(shape);
  return from_values(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  if (ad::numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  if (shape.size() > 3) throw DimensionError("tensor rank above 3 is not supported");
  check_finite("tensor construction", values);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({}, {value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("axis out of range for shape " + to_string(shape()));
  return node_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

void Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on) {
    node_->grad.assign(node_->value.size(), 0.0);
  } else {
    node_->grad.clear();
  }
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return from_values(node_->shape, node_->value, false);
}

// ---------------------------------------------------------------- Graph

Graph::Graph(Mode mode) : mode_(mode), id_(g_next_graph_id.fetch_add(1)) {}

Tensor Graph::emit(const char* op, Shape shape, std::vector<double> value,
                   std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
  bool needs_grad = false;
  for (const Tensor* t : inputs) needs_grad = needs_grad || t->requires_grad();
  return finish(op, std::move(shape), std::move(value), needs_grad, std::move(backward));
}

Tensor Graph::emit(const char* op, Shape shape, std::vector<double> value,
                   std::span<const Tensor> inputs, BackwardFn backward) {
  bool needs_grad = false;
  for (const Tensor& t : inputs) needs_grad = needs_grad || t.requires_grad();
  return finish(op, std::move(shape), std::move(value), needs_grad, std::move(backward));
}

Tensor Graph::finish(const char* op, Shape shape, std::vector<double> value,
                     bool needs_grad, BackwardFn backward) {
  if (ad::numel(shape) != value.size()) {
    throw DimensionError(std::string(op) + ": output shape " + to_string(shape) +
                         " does not match value count");
  }
  check_finite(op, value);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (needs_grad && recording()) {
    if (consumed_) throw GraphError("cannot record into a graph after backward()");
    node->requires_grad = true;
    node->grad.assign(node->value.size(), 0.0);
    node->graph_id = id_;
    records_.push_back(Record{op, node, std::move(backward)});
  }
  return Tensor(std::move(node));
}

void Graph::backward(const Tensor& loss) {
  if (consumed_) throw GraphError("backward() called twice on the same graph");
  if (!loss.defined() || loss.numel() != 1) {
    throw GraphError("backward() needs a scalar loss");
  }
  if (!loss.requires_grad() || loss.node()->graph_id != id_) {
    throw GraphError("loss is detached from this graph");
  }
  consumed_ = true;
  loss.node()->grad[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (is_corrupted(it->op)) {
      Node scaled = *it->output;
      for (auto& v : scaled.grad) v *= 1.5;
      it->backward(scaled);
    } else {
      it->backward(*it->output);
    }
  }
}

// ---------------------------------------------------------------- ops

std::size_t window_output_length(std::size_t length, std::size_t kernel,
                                 std::size_t stride, std::size_t padding) {
  if (kernel < 1 || stride < 1) throw GeometryError("kernel and stride must be >= 1");
  const std::size_t padded = length + 2 * padding;
  if (padded < kernel) {
    throw GeometryError("window of size " + std::to_string(kernel) +
                        " does not fit padded length " + std::to_string(padded));
  }
  return (padded - kernel) / stride + 1;
}

namespace {

// Range of output positions t whose tap t*stride + k - pad lands in [0, len).
std::pair<std::ptrdiff_t, std::ptrdiff_t> valid_taps(std::ptrdiff_t len, std::ptrdiff_t out_len,
                                                     std::ptrdiff_t k, std::ptrdiff_t stride,
                                                     std::ptrdiff_t pad) {
  const std::ptrdiff_t off = k - pad;
  std::ptrdiff_t lo = 0;
  if (off < 0) lo = (-off + stride - 1) / stride;
  std::ptrdiff_t hi = out_len;  // exclusive
  if (len - off <= 0) {
    hi = 0;
  } else {
    hi = std::min(out_len, (len - off - 1) / stride + 1);
  }
  return {lo, std::max(lo, hi)};
}

}  // namespace

Tensor conv1d(Graph& g, const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
  require_rank("conv1d input", input, 2);
  require_rank("conv1d weight", weight, 3);
  require_rank("conv1d bias", bias, 1);
  const std::size_t c_in = input.dim(0), len = input.dim(1);
  const std::size_t c_out = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c_in) {
    throw DimensionError("conv1d: weight expects " + std::to_string(weight.dim(1)) +
                         " input channels, input has " + std::to_string(c_in));
  }
  if (bias.dim(0) != c_out) throw DimensionError("conv1d: bias size mismatch");
  const std::size_t out_len = window_output_length(len, k, stride, padding);

  const auto x = input.values();
  const auto w = weight.values();
  const auto b = bias.values();
  std::vector<double> y(c_out * out_len);
  const auto L = static_cast<std::ptrdiff_t>(len);
  const auto S = static_cast<std::ptrdiff_t>(stride);
  const auto P = static_cast<std::ptrdiff_t>(padding);
  const auto TO = static_cast<std::ptrdiff_t>(out_len);
  for (std::size_t o = 0; o < c_out; ++o) {
    double* yo = y.data() + o * out_len;
    std::fill(yo, yo + out_len, b[o]);
    for (std::size_t c = 0; c < c_in; ++c) {
      const double* xc = x.data() + c * len;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double wv = w[(o * c_in + c) * k + kk];
        const auto [lo, hi] = valid_taps(L, TO, static_cast<std::ptrdiff_t>(kk), S, P);
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - P;
        for (std::ptrdiff_t t = lo; t < hi; ++t) yo[t] += wv * xc[t * S + off];
      }
    }
  }

  auto xn = input.node(), wn = weight.node(), bn = bias.node();
  return g.emit("conv1d", {c_out, out_len}, std::move(y), {&input, &weight, &bias},
                [=](const Node& out) {
                  const auto& gy = out.grad;
                  for (std::size_t o = 0; o < c_out; ++o) {
                    const double* go = gy.data() + o * out_len;
                    if (bn->requires_grad) {
                      double acc = 0.0;
                      for (std::size_t t = 0; t < out_len; ++t) acc += go[t];
                      bn->grad[o] += acc;
                    }
                    for (std::size_t c = 0; c < c_in; ++c) {
                      const double* xc = xn->value.data() + c * len;
                      for (std::size_t kk = 0; kk < k; ++kk) {
                        const std::size_t widx = (o * c_in + c) * k + kk;
                        const auto [lo, hi] =
                            valid_taps(L, TO, static_cast<std::ptrdiff_t>(kk), S, P);
                        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - P;
                        if (wn->requires_grad) {
                          double acc = 0.0;
                          for (std::ptrdiff_t t = lo; t < hi; ++t) acc += go[t] * xc[t * S + off];
                          wn->grad[widx] += acc;
                        }
                        if (xn->requires_grad) {
                          const double wv = wn->value[widx];
                          double* gx = xn->grad.data() + c * len;
                          for (std::ptrdiff_t t = lo; t < hi; ++t) gx[t * S + off] += wv * go[t];
                        }
                      }
                    }
                  }
                });
}

Tensor maxpool1d(Graph& g, const Tensor& input, std::size_t kernel, std::size_t stride,
                 std::size_t padding) {
  require_rank("maxpool1d input", input, 2);
  const std::size_t channels = input.dim(0), len = input.dim(1);
  const std::size_t out_len = window_output_length(len, kernel, stride, padding);
  const auto x = input.values();
  std::vector<double> y(channels * out_len);
  std::vector<std::size_t> arg(channels * out_len);
  constexpr std::size_t kPad = static_cast<std::size_t>(-1);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const auto start = static_cast<std::ptrdiff_t>(t * stride) - static_cast<std::ptrdiff_t>(padding);
      double best_value = 0.0;
      std::size_t best = kPad;
      bool first = true;
      for (std::ptrdiff_t i = start; i < start + static_cast<std::ptrdiff_t>(kernel); ++i) {
        const bool inside = i >= 0 && i < static_cast<std::ptrdiff_t>(len);
        const double v = inside ? x[c * len + i] : 0.0;
        if (first || v > best_value) {
          best_value = v;
          best = inside ? c * len + static_cast<std::size_t>(i) : kPad;
          first = false;
        }
      }
      y[c * out_len + t] = best_value;
      arg[c * out_len + t] = best;
      g.note_branch(best);
    }
  }
  auto xn = input.node();
  return g.emit("maxpool1d", {channels, out_len}, std::move(y), {&input},
                [xn, arg = std::move(arg)](const Node& out) {
                  for (std::size_t i = 0; i < arg.size(); ++i) {
                    if (arg[i] != static_cast<std::size_t>(-1)) xn->grad[arg[i]] += out.grad[i];
                  }
                });
}

Tensor pointwise(Graph& g, const Tensor& input, Pointwise kind) {
  const auto x = input.values();
  std::vector<double> y(x.size());
  const char* op = "pointwise";
  switch (kind) {
    case Pointwise::kSigmoid:
      op = "sigmoid";
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = stable_sigmoid(x[i]);
      break;
    case Pointwise::kRelu:
      op = "relu";
      for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = x[i] > 0.0 ? x[i] : 0.0;
        g.note_branch(x[i] > 0.0 ? i + 1 : 0);
      }
      break;
    case Pointwise::kExp:
      op = "exp";
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::exp(x[i]);
      break;
    case Pointwise::kSquare:
      op = "square";
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * x[i];
      break;
  }
  auto xn = input.node();
  return g.emit(op, input.shape(), std::move(y), {&input}, [xn, kind](const Node& out) {
    const auto n = out.value.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double gy = out.grad[i];
      switch (kind) {
        case Pointwise::kSigmoid:
          xn->grad[i] += gy * out.value[i] * (1.0 - out.value[i]);
          break;
        case Pointwise::kRelu:
          if (xn->value[i] > 0.0) xn->grad[i] += gy;
          break;
        case Pointwise::kExp:
          xn->grad[i] += gy * out.value[i];
          break;
        case Pointwise::kSquare:
          xn->grad[i] += gy * 2.0 * xn->value[i];
          break;
      }
    }
  });
}

Tensor smooth_l1(Graph& g, const Tensor& input) {
  const auto x = input.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::abs(x[i]);
    y[i] = a < 1.0 ? 0.5 * x[i] * x[i] : a - 0.5;
    g.note_branch(a < 1.0 ? 1 : (x[i] > 0.0 ? 2 : 3));
  }
  auto xn = input.node();
  return g.emit("smooth_l1", input.shape(), std::move(y), {&input}, [xn](const Node& out) {
    for (std::size_t i = 0; i < out.grad.size(); ++i) {
      const double v = xn->value[i];
      const double d = std::abs(v) < 1.0 ? v : (v > 0.0 ? 1.0 : -1.0);
      xn->grad[i] += out.grad[i] * d;
    }
  });
}

Tensor softmax(Graph& g, const Tensor& input) {
  require_rank("softmax", input, 1);
  const auto x = input.values();
  if (x.empty()) throw DimensionError("softmax of an empty tensor");
  const double m = *std::max_element(x.begin(), x.end());
  std::vector<double> y(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += (y[i] = std::exp(x[i] - m));
  for (auto& v : y) v /= z;
  auto xn = input.node();
  return g.emit("softmax", input.shape(), std::move(y), {&input}, [xn](const Node& out) {
    double dot = 0.0;
    for (std::size_t i = 0; i < out.value.size(); ++i) dot += out.grad[i] * out.value[i];
    for (std::size_t i = 0; i < out.value.size(); ++i) {
      xn->grad[i] += out.value[i] * (out.grad[i] - dot);
    }
  });
}

Tensor reduce_weighted_sum(Graph& g, const Tensor& features, const Tensor& weights) {
  require_rank("reduce_weighted_sum features", features, 2);
  const std::size_t len = features.dim(0), depth = features.dim(1);
  const bool batched = weights.rank() == 2;
  if (!batched) require_rank("reduce_weighted_sum weights", weights, 1);
  const std::size_t rows = batched ? weights.dim(0) : 1;
  const std::size_t wlen = batched ? weights.dim(1) : weights.dim(0);
  if (wlen != len) {
    throw DimensionError("reduce_weighted_sum: " + std::to_string(wlen) + " weights for " +
                         std::to_string(len) + " time steps");
  }
  const auto f = features.values();
  const auto w = weights.values();
  std::vector<double> y(rows * depth, 0.0);
  for (std::size_t k = 0; k < rows; ++k) {
    double* yk = y.data() + k * depth;
    for (std::size_t t = 0; t < len; ++t) {
      const double wv = w[k * len + t];
      const double* ft = f.data() + t * depth;
      for (std::size_t d = 0; d < depth; ++d) yk[d] += wv * ft[d];
    }
  }
  Shape shape = batched ? Shape{rows, depth} : Shape{depth};
  auto fn = features.node(), wn = weights.node();
  return g.emit("reduce_weighted_sum", std::move(shape), std::move(y), {&features, &weights},
                [=](const Node& out) {
                  for (std::size_t k = 0; k < rows; ++k) {
                    const double* gk = out.grad.data() + k * depth;
                    for (std::size_t t = 0; t < len; ++t) {
                      const double* ft = fn->value.data() + t * depth;
                      if (wn->requires_grad) {
                        double acc = 0.0;
                        for (std::size_t d = 0; d < depth; ++d) acc += gk[d] * ft[d];
                        wn->grad[k * len + t] += acc;
                      }
                      if (fn->requires_grad) {
                        const double wv = wn->value[k * len + t];
                        double* gf = fn->grad.data() + t * depth;
                        for (std::size_t d = 0; d < depth; ++d) gf[d] += wv * gk[d];
                      }
                    }
                  }
                });
}

Tensor transpose(Graph& g, const Tensor& input) {
  require_rank("transpose", input, 2);
  const std::size_t a = input.dim(0), b = input.dim(1);
  const auto x = input.values();
  std::vector<double> y(a * b);
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j) y[j * a + i] = x[i * b + j];
  auto xn = input.node();
  return g.emit("transpose", {b, a}, std::move(y), {&input}, [=](const Node& out) {
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t j = 0; j < b; ++j) xn->grad[i * b + j] += out.grad[j * a + i];
  });
}

Tensor reshape(Graph& g, const Tensor& input, Shape shape) {
  if (ad::numel(shape) != input.numel()) {
    throw DimensionError("reshape " + to_string(input.shape()) + " -> " + to_string(shape));
  }
  std::vector<double> y(input.values().begin(), input.values().end());
  auto xn = input.node();
  return g.emit("reshape", std::move(shape), std::move(y), {&input}, [xn](const Node& out) {
    for (std::size_t i = 0; i < out.grad.size(); ++i) xn->grad[i] += out.grad[i];
  });
}

Tensor gather(Graph& g, const Tensor& input, std::span<const std::size_t> indices) {
  const auto x = input.values();
  std::vector<double> y(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.size()) throw DimensionError("gather index out of range");
    y[i] = x[indices[i]];
  }
  auto xn = input.node();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const std::size_t n = idx.size();
  return g.emit("gather", {n}, std::move(y), {&input},
                [xn, idx = std::move(idx)](const Node& out) {
                  for (std::size_t i = 0; i < idx.size(); ++i) xn->grad[idx[i]] += out.grad[i];
                });
}

Tensor concat(Graph& g, std::span<const Tensor> inputs) {
  std::vector<double> y;
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& t : inputs) {
    y.insert(y.end(), t.values().begin(), t.values().end());
    nodes.push_back(t.node());
  }
  const std::size_t n = y.size();
  return g.emit("concat", {n}, std::move(y), inputs, [nodes = std::move(nodes)](const Node& out) {
    std::size_t offset = 0;
    for (const auto& nd : nodes) {
      if (nd->requires_grad) {
        for (std::size_t i = 0; i < nd->value.size(); ++i) nd->grad[i] += out.grad[offset + i];
      }
      offset += nd->value.size();
    }
  });
}

namespace {

enum class Binary { kAdd, kSub, kMul, kMin, kMax };

Tensor binary(Graph& g, const char* op, const Tensor& a, const Tensor& b, Binary kind) {
  require_same_shape(op, a, b);
  const auto x = a.values(), z = b.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    switch (kind) {
      case Binary::kAdd: y[i] = x[i] + z[i]; break;
      case Binary::kSub: y[i] = x[i] - z[i]; break;
      case Binary::kMul: y[i] = x[i] * z[i]; break;
      case Binary::kMin: y[i] = z[i] < x[i] ? z[i] : x[i]; g.note_branch(z[i] < x[i]); break;
      case Binary::kMax: y[i] = z[i] > x[i] ? z[i] : x[i]; g.note_branch(z[i] > x[i]); break;
    }
  }
  auto an = a.node(), bn = b.node();
  return g.emit(op, a.shape(), std::move(y), {&a, &b}, [an, bn, kind](const Node& out) {
    for (std::size_t i = 0; i < out.grad.size(); ++i) {
      const double gy = out.grad[i];
      double da = 0.0, db = 0.0;
      switch (kind) {
        case Binary::kAdd: da = gy; db = gy; break;
        case Binary::kSub: da = gy; db = -gy; break;
        case Binary::kMul: da = gy * bn->value[i]; db = gy * an->value[i]; break;
        case Binary::kMin:
          (bn->value[i] < an->value[i] ? db : da) = gy;
          break;
        case Binary::kMax:
          (bn->value[i] > an->value[i] ? db : da) = gy;
          break;
      }
      if (an->requires_grad) an->grad[i] += da;
      if (bn->requires_grad) bn->grad[i] += db;
    }
  });
}

}  // namespace

Tensor add(Graph& g, const Tensor& a, const Tensor& b) { return binary(g, "add", a, b, Binary::kAdd); }
Tensor sub(Graph& g, const Tensor& a, const Tensor& b) { return binary(g, "sub", a, b, Binary::kSub); }
Tensor mul(Graph& g, const Tensor& a, const Tensor& b) { return binary(g, "mul", a, b, Binary::kMul); }
Tensor minimum(Graph& g, const Tensor& a, const Tensor& b) { return binary(g, "minimum", a, b, Binary::kMin); }
Tensor maximum(Graph& g, const Tensor& a, const Tensor& b) { return binary(g, "maximum", a, b, Binary::kMax); }

Tensor affine(Graph& g, const Tensor& input, double scale, double shift) {
  const auto x = input.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = scale * x[i] + shift;
  auto xn = input.node();
  return g.emit("affine", input.shape(), std::move(y), {&input}, [xn, scale](const Node& out) {
    for (std::size_t i = 0; i < out.grad.size(); ++i) xn->grad[i] += scale * out.grad[i];
  });
}

Tensor add_const(Graph& g, const Tensor& input, std::span<const double> c) {
  if (c.size() != input.numel()) throw DimensionError("add_const: size mismatch");
  const auto x = input.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + c[i];
  auto xn = input.node();
  return g.emit("add_const", input.shape(), std::move(y), {&input}, [xn](const Node& out) {
    for (std::size_t i = 0; i < out.grad.size(); ++i) xn->grad[i] += out.grad[i];
  });
}

Tensor scale_by(Graph& g, const Tensor& input, std::span<const double> c) {
  if (c.size() != input.numel()) throw DimensionError("scale_by: size mismatch");
  const auto x = input.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * c[i];
  auto xn = input.node();
  std::vector<double> factors(c.begin(), c.end());
  return g.emit("scale_by", input.shape(), std::move(y), {&input},
                [xn, factors = std::move(factors)](const Node& out) {
                  for (std::size_t i = 0; i < out.grad.size(); ++i) {
                    xn->grad[i] += factors[i] * out.grad[i];
                  }
                });
}

Tensor clamp(Graph& g, const Tensor& input, double lo, double hi) {
  const auto x = input.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::min(hi, std::max(lo, x[i]));
    g.note_branch(x[i] <= lo ? 1 : (x[i] >= hi ? 2 : 3));
  }
  auto xn = input.node();
  return g.emit("clamp", input.shape(), std::move(y), {&input}, [xn, lo, hi](const Node& out) {
    for (std::size_t i = 0; i < out.grad.size(); ++i) {
      const double v = xn->value[i];
      if (v > lo && v < hi) xn->grad[i] += out.grad[i];
    }
  });
}

Tensor sum(Graph& g, const Tensor& input) {
  double s = 0.0;
  for (double v : input.values()) s += v;
  auto xn = input.node();
  return g.emit("sum", {}, {s}, {&input}, [xn](const Node& out) {
    const double gy = out.grad[0];
    for (auto& gx : xn->grad) gx += gy;
  });
}

Tensor softmax_cross_entropy(Graph& g, const Tensor& logits, std::size_t group,
                             std::span<const CrossEntropyTerm> terms) {
  require_rank("softmax_cross_entropy", logits, 2);
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  const auto x = logits.values();
  std::vector<CrossEntropyTerm> picks(terms.begin(), terms.end());
  // probs[i * group + r]: softmax of term i, row r
  std::vector<double> probs(picks.size() * group);
  double loss = 0.0;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const auto& p = picks[i];
    if (p.row_offset + group > rows || p.column >= cols || p.target >= group) {
      throw DimensionError("softmax_cross_entropy: term out of range");
    }
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < group; ++r) m = std::max(m, x[(p.row_offset + r) * cols + p.column]);
    double z = 0.0;
    for (std::size_t r = 0; r < group; ++r) {
      z += (probs[i * group + r] = std::exp(x[(p.row_offset + r) * cols + p.column] - m));
    }
    for (std::size_t r = 0; r < group; ++r) probs[i * group + r] /= z;
    const double lse = m + std::log(z);
    loss += p.weight * (lse - x[(p.row_offset + p.target) * cols + p.column]);
  }
  auto xn = logits.node();
  return g.emit("softmax_cross_entropy", {}, {loss}, {&logits},
                [xn, cols, group, picks = std::move(picks), probs = std::move(probs)](const Node& out) {
                  const double gy = out.grad[0];
                  for (std::size_t i = 0; i < picks.size(); ++i) {
                    const auto& p = picks[i];
                    for (std::size_t r = 0; r < group; ++r) {
                      const double onehot = r == p.target ? 1.0 : 0.0;
                      xn->grad[(p.row_offset + r) * cols + p.column] +=
                          gy * p.weight * (probs[i * group + r] - onehot);
                    }
                  }
                });
}

namespace debug {

void corrupt_backward(std::string op) {
  auto& c = corruption();
  std::lock_guard lock(c.mu);
  c.op = std::move(op);
  c.active = true;
}

void clear_corruption() {
  auto& c = corruption();
  std::lock_guard lock(c.mu);
  c.op.clear();
  c.active = false;
}

}  // namespace debug

}  // namespace gtan::ad
