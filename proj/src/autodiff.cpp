// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#include "galw/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "galw/error.hpp"

namespace galw::ad {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

using NodePtr = std::shared_ptr<detail::Node>;

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

bool is_matrix(const Tensor& t) { return t.shape().size() == 2; }

// Accumulate into an input's gradient and mark it reached.
inline double* grad_sink(detail::Node& n) {
  n.touched = true;
  return n.grad.data();
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape(shape);
  auto node = std::make_shared<detail::Node>();
  const auto n = shape_numel(shape);
  node->shape = std::move(shape);
  node->data.assign(n, 0.0);
  node->grad.assign(n, 0.0);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_string(shape) + " cannot hold " +
                         std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->grad.assign(values.size(), 0.0);
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (!is_scalar()) throw ContractError("item() on non-scalar tensor " + shape_string(shape()));
  return node_->data[0];
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::clone() const { return from(node_->shape, node_->data, node_->requires_grad); }

Tensor Tape::record(Shape shape, std::vector<double> data, bool requires_grad,
                    std::function<void(const detail::Node& out)> rule) {
  Tensor out = Tensor::from(std::move(shape), std::move(data), requires_grad);
  if (requires_grad) {
    NodePtr node = out.node_;
    ops_.push_back(Op{node, [node, rule = std::move(rule)] { rule(*node); }});
  }
  return out;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (!is_matrix(a) || !is_matrix(b) || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  NodePtr na = a.node_, nb = b.node_;
  return record({m, n}, std::move(out), na->requires_grad || nb->requires_grad,
                [na, nb, m, k, n](const detail::Node& o) {
                  const double* g = o.grad.data();
                  if (na->requires_grad) {
                    double* ga = grad_sink(*na);
                    const double* pb = nb->data.data();
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * pb[p * n + j];
                        ga[i * k + p] += acc;
                      }
                    }
                  }
                  if (nb->requires_grad) {
                    double* gb = grad_sink(*nb);
                    const double* pa = na->data.data();
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t p = 0; p < k; ++p) {
                        const double av = pa[i * k + p];
                        double* gbrow = gb + p * n;
                        const double* grow = g + i * n;
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                      }
                    }
                  }
                });
}

Tensor Tape::add_bias(const Tensor& a, const Tensor& bias) {
  if (!is_matrix(a) || bias.size() != a.shape()[1]) {
    throw DimensionError("add_bias: shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(bias.shape()));
  }
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias[j];
  }
  NodePtr na = a.node_, nb = bias.node_;
  return record(a.shape(), std::move(out), na->requires_grad || nb->requires_grad,
                [na, nb, m, n](const detail::Node& o) {
                  if (na->requires_grad) {
                    double* ga = grad_sink(*na);
                    for (std::size_t i = 0; i < m * n; ++i) ga[i] += o.grad[i];
                  }
                  if (nb->requires_grad) {
                    double* gb = grad_sink(*nb);
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t j = 0; j < n; ++j) gb[j] += o.grad[i * n + j];
                    }
                  }
                });
}

Tensor Tape::relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  NodePtr na = a.node_;
  return record(a.shape(), std::move(out), na->requires_grad, [na](const detail::Node& o) {
    double* ga = grad_sink(*na);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      if (na->data[i] > 0.0) ga[i] += o.grad[i];
    }
  });
}

Tensor Tape::softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (!is_matrix(logits) || labels.size() != logits.shape()[0]) {
    throw DimensionError("softmax_cross_entropy: logits " + shape_string(logits.shape()) +
                         " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t b = logits.shape()[0], c = logits.shape()[1];
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw IndexError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                       " at row " + std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
    }
  }
  std::vector<double> probs(b * c);
  std::vector<int> lab(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = logits.data().data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      z += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    total += -(row[lab[i]] - mx - std::log(z));
  }
  NodePtr nl = logits.node_;
  return record({1}, {total / static_cast<double>(b)}, nl->requires_grad,
                [nl, probs = std::move(probs), lab = std::move(lab), b, c](const detail::Node& o) {
                  double* g = grad_sink(*nl);
                  const double scale = o.grad[0] / static_cast<double>(b);
                  for (std::size_t i = 0; i < b; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                      const double onehot = static_cast<int>(j) == lab[i] ? 1.0 : 0.0;
                      g[i * c + j] += scale * (probs[i * c + j] - onehot);
                    }
                  }
                });
}

Tensor Tape::mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("mse: shape mismatch " + shape_string(pred.shape()) + " vs " +
                         shape_string(target.shape()));
  }
  const std::size_t n = pred.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred[i] - target[i];
    total += d * d;
  }
  NodePtr np = pred.node_, nt = target.node_;
  return record({1}, {total / static_cast<double>(n)}, np->requires_grad || nt->requires_grad,
                [np, nt, n](const detail::Node& o) {
                  const double scale = 2.0 * o.grad[0] / static_cast<double>(n);
                  if (np->requires_grad) {
                    double* g = grad_sink(*np);
                    for (std::size_t i = 0; i < n; ++i) g[i] += scale * (np->data[i] - nt->data[i]);
                  }
                  if (nt->requires_grad) {
                    double* g = grad_sink(*nt);
                    for (std::size_t i = 0; i < n; ++i) g[i] -= scale * (np->data[i] - nt->data[i]);
                  }
                });
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  NodePtr na = a.node_, nb = b.node_;
  return record(a.shape(), std::move(out), na->requires_grad || nb->requires_grad,
                [na, nb](const detail::Node& o) {
                  // na and nb may alias (x + x); each use accumulates once.
                  if (na->requires_grad) {
                    double* g = grad_sink(*na);
                    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
                  }
                  if (nb->requires_grad) {
                    double* g = grad_sink(*nb);
                    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
                  }
                });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("sub: shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  NodePtr na = a.node_, nb = b.node_;
  return record(a.shape(), std::move(out), na->requires_grad || nb->requires_grad,
                [na, nb](const detail::Node& o) {
                  if (na->requires_grad) {
                    double* g = grad_sink(*na);
                    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
                  }
                  if (nb->requires_grad) {
                    double* g = grad_sink(*nb);
                    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
                  }
                });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  NodePtr na = a.node_, nb = b.node_;
  return record(a.shape(), std::move(out), na->requires_grad || nb->requires_grad,
                [na, nb](const detail::Node& o) {
                  if (na->requires_grad) {
                    double* g = grad_sink(*na);
                    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * nb->data[i];
                  }
                  if (nb->requires_grad) {
                    double* g = grad_sink(*nb);
                    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * na->data[i];
                  }
                });
}

Tensor Tape::mul_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * c;
  NodePtr na = a.node_;
  return record(a.shape(), std::move(out), na->requires_grad, [na, c](const detail::Node& o) {
    double* g = grad_sink(*na);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * c;
  });
}

Tensor Tape::add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + c;
  NodePtr na = a.node_;
  return record(a.shape(), std::move(out), na->requires_grad, [na](const detail::Node& o) {
    double* g = grad_sink(*na);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor Tape::log(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(a[i] > 0.0)) {
      throw DomainError("log: non-positive input " + std::to_string(a[i]) + " at index " +
                        std::to_string(i));
    }
    out[i] = std::log(a[i]);
  }
  NodePtr na = a.node_;
  return record(a.shape(), std::move(out), na->requires_grad, [na](const detail::Node& o) {
    double* g = grad_sink(*na);
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] / na->data[i];
  });
}

Tensor Tape::exp(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a[i]);
  NodePtr na = a.node_;
  std::vector<double> cached = out;
  return record(a.shape(), std::move(out), na->requires_grad,
                [na, cached = std::move(cached)](const detail::Node& o) {
                  double* g = grad_sink(*na);
                  for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * cached[i];
                });
}

Tensor Tape::abs(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(a[i]);
  NodePtr na = a.node_;
  return record(a.shape(), std::move(out), na->requires_grad, [na](const detail::Node& o) {
    double* g = grad_sink(*na);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double x = na->data[i];
      if (x > 0.0) {
        g[i] += o.grad[i];
      } else if (x < 0.0) {
        g[i] -= o.grad[i];
      }
    }
  });
}

Tensor Tape::sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  NodePtr na = a.node_;
  return record({1}, {total}, na->requires_grad, [na](const detail::Node& o) {
    double* g = grad_sink(*na);
    for (std::size_t i = 0; i < na->grad.size(); ++i) g[i] += o.grad[0];
  });
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || !loss.is_scalar()) {
    throw ContractError("backward: seed must be a scalar tensor, got " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  if (ops_.empty()) throw ContractError("backward: tape is empty");
  for (auto& op : ops_) {
    std::fill(op.out->grad.begin(), op.out->grad.end(), 0.0);
    op.out->touched = false;
  }
  loss.node_->grad[0] += 1.0;
  loss.node_->touched = true;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (it->out->touched) it->backward();
  }
}

}  // namespace galw::ad
