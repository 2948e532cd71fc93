// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal reverse-mode differentiation over small dense tensors.
//
// A Graph is a dynamic tape: every op that touches a tensor requiring a
// gradient appends one record, and Graph::backward() replays the records in
// exact reverse order. Values are 64-bit and every op output is checked for
// NaN/Inf.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gtan::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // same size as value iff requires_grad
  bool requires_grad = false;
  std::uint64_t graph_id = 0;  // 0 for leaves
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> values() const { return node_->value; }
  std::span<double> values_mut() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> grad_mut() { return node_->grad; }

  double item() const;
  double at(std::size_t flat) const { return node_->value.at(flat); }

  void set_requires_grad(bool on);
  void zero_grad();

  // Value copy that is not connected to any graph.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Receives the finished output node; adds into the grads of its inputs.
using BackwardFn = std::function<void(const Node& out)>;

class Graph {
 public:
  enum class Mode { kRecord, kInference };

  explicit Graph(Mode mode = Mode::kRecord);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  // Builds an op output. The record (and the output gradient buffer) only
  // exists when recording and at least one input requires a gradient.
  Tensor emit(const char* op, Shape shape, std::vector<double> value,
              std::initializer_list<const Tensor*> inputs, BackwardFn backward);
  Tensor emit(const char* op, Shape shape, std::vector<double> value,
              std::span<const Tensor> inputs, BackwardFn backward);

  // Propagates d(loss)/d(.) into every tensor that requires a gradient.
  // Leaf gradients accumulate; a graph can be consumed only once.
  void backward(const Tensor& loss);

  // Folds a discrete forward decision (ReLU mask, pool winner, clamp side...)
  // into a running signature; equal signatures mean the same linear piece.
  void note_branch(std::uint64_t code) { signature_ = (signature_ ^ code) * 1099511628211ULL; }
  std::uint64_t branch_signature() const { return signature_; }

  std::size_t size() const { return records_.size(); }
  bool recording() const { return mode_ == Mode::kRecord; }
  std::uint64_t id() const { return id_; }

 private:
  struct Record {
    const char* op;
    std::shared_ptr<Node> output;
    BackwardFn backward;
  };

  Tensor finish(const char* op, Shape shape, std::vector<double> value,
                bool needs_grad, BackwardFn backward);

  Mode mode_;
  std::uint64_t id_;
  std::vector<Record> records_;
  bool consumed_ = false;
  std::uint64_t signature_ = 14695981039346656037ULL;
};

// Output length of a strided window op; throws GeometryError when empty.
std::size_t window_output_length(std::size_t length, std::size_t kernel,
                                 std::size_t stride, std::size_t padding);

// input [C_in, T], weight [C_out, C_in, k], bias [C_out] -> [C_out, T'].
Tensor conv1d(Graph& g, const Tensor& input, const Tensor& weight,
              const Tensor& bias, std::size_t stride, std::size_t padding);

// input [C, T] -> [C, T']. Padding cells hold zero; ties go to the lowest
// index, and a winning padding cell receives no gradient.
Tensor maxpool1d(Graph& g, const Tensor& input, std::size_t kernel,
                 std::size_t stride, std::size_t padding);

enum class Pointwise { kSigmoid, kRelu, kExp, kSquare };

Tensor pointwise(Graph& g, const Tensor& input, Pointwise kind);
inline Tensor sigmoid(Graph& g, const Tensor& x) { return pointwise(g, x, Pointwise::kSigmoid); }
inline Tensor relu(Graph& g, const Tensor& x) { return pointwise(g, x, Pointwise::kRelu); }
inline Tensor exp(Graph& g, const Tensor& x) { return pointwise(g, x, Pointwise::kExp); }
inline Tensor square(Graph& g, const Tensor& x) { return pointwise(g, x, Pointwise::kSquare); }

// Smooth L1: 0.5 x^2 if |x| < 1, |x| - 0.5 otherwise.
Tensor smooth_l1(Graph& g, const Tensor& input);

// Numerically stable softmax over a rank-1 tensor.
Tensor softmax(Graph& g, const Tensor& input);

// features [T, D], weights [T] -> [D]; or weights [K, T] -> [K, D].
Tensor reduce_weighted_sum(Graph& g, const Tensor& features,
                           const Tensor& weights);

// [A, B] -> [B, A].
Tensor transpose(Graph& g, const Tensor& input);
Tensor reshape(Graph& g, const Tensor& input, Shape shape);

// Flat-index gather into a rank-1 result.
Tensor gather(Graph& g, const Tensor& input, std::span<const std::size_t> indices);

// Concatenates the flattened inputs into a rank-1 result.
Tensor concat(Graph& g, std::span<const Tensor> inputs);

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor sub(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);

// Elementwise min/max; ties route the gradient to `a`.
Tensor minimum(Graph& g, const Tensor& a, const Tensor& b);
Tensor maximum(Graph& g, const Tensor& a, const Tensor& b);

// scale * x + shift.
Tensor affine(Graph& g, const Tensor& input, double scale, double shift);
// x + c and x * c for a constant vector c of the same size.
Tensor add_const(Graph& g, const Tensor& input, std::span<const double> c);
Tensor scale_by(Graph& g, const Tensor& input, std::span<const double> c);

// Gradient passes only where lo < x < hi.
Tensor clamp(Graph& g, const Tensor& input, double lo, double hi);

// Sum of all elements -> scalar (rank 0).
Tensor sum(Graph& g, const Tensor& input);

// One softmax cross-entropy term over a group of `group` consecutive rows of
// a [R, K] logit map, taken at one column.
struct CrossEntropyTerm {
  std::size_t row_offset;
  std::size_t column;
  std::size_t target;  // 0 <= target < group
  double weight;
};

// Sum of weight * -log softmax(logits[row_offset : row_offset+group, column])[target].
Tensor softmax_cross_entropy(Graph& g, const Tensor& logits, std::size_t group,
                             std::span<const CrossEntropyTerm> terms);

namespace debug {
// Test hook: scales the incoming gradient of every record of `op` by 1.5
// during backward, which breaks that op's backward rule.
void corrupt_backward(std::string op);
void clear_corruption();
}  // namespace debug

}  // namespace gtan::ad
