// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Define-by-run reverse-mode automatic differentiation over dense row-major
// float64 tensors. A Tape records every primitive applied in a forward pass;
// Tape::backward replays the recorded local rules in reverse order and
// accumulates (+=) into every tensor that requires a gradient.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace galw::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  // Set when an upstream backward rule has written into `grad` during the
  // current replay; lets backward skip branches the seed cannot reach.
  bool touched = false;
};
}  // namespace detail

/// Shared handle to a tensor node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->data.size(); }
  std::size_t rows() const { return node_->shape.at(0); }
  std::size_t cols() const { return node_->shape.size() > 1 ? node_->shape[1] : 1; }
  bool is_scalar() const { return size() == 1; }

  std::span<double> data() { return node_->data; }
  std::span<const double> data() const { return node_->data; }
  std::span<double> grad() { return node_->grad; }
  std::span<const double> grad() const { return node_->grad; }

  double item() const;
  double operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad();

  /// Independent copy of the values (gradient zeroed).
  Tensor clone() const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend class Tape;
};

/// Records primitives in topological (execution) order. Single-threaded;
/// distinct tapes share no state.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // [m x k] . [k x n] -> [m x n]
  Tensor matmul(const Tensor& a, const Tensor& b);
  // [m x n] + bias[n] broadcast over rows.
  Tensor add_bias(const Tensor& a, const Tensor& bias);
  Tensor relu(const Tensor& a);
  /// Mean over the batch of -log softmax(logits)[label].
  Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);
  /// Mean over all entries of (pred - target)^2.
  Tensor mse(const Tensor& pred, const Tensor& target);

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor mul_scalar(const Tensor& a, double c);
  Tensor add_scalar(const Tensor& a, double c);
  Tensor log(const Tensor& a);
  Tensor exp(const Tensor& a);
  Tensor abs(const Tensor& a);
  /// Sum of all entries -> scalar.
  Tensor sum(const Tensor& a);

  /// Seeds loss.grad = 1 and replays the tape in reverse. Intermediate
  /// gradients are reset first, so backward may be called repeatedly from
  /// different scalar roots of the same forward pass; leaf gradients keep
  /// accumulating until zeroed by the caller.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return ops_.size(); }
  bool empty() const noexcept { return ops_.empty(); }
  void clear() { ops_.clear(); }

 private:
  struct Op {
    std::shared_ptr<detail::Node> out;
    std::function<void()> backward;
  };

  Tensor record(Shape shape, std::vector<double> data, bool requires_grad,
                std::function<void(const detail::Node& out)> rule);

  std::vector<Op> ops_;
};

}  // namespace galw::ad
