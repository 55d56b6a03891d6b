// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "galw/autodiff.hpp"
#include "galw/error.hpp"
#include "galw/random.hpp"

using galw::ad::Tape;
using galw::ad::Tensor;
using galw::testing::fd_check;

namespace {

Tensor random_tensor(galw::Rng& rng, galw::ad::Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(galw::ad::shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

// Values bounded away from zero so kinks stay outside the FD stencil.
Tensor away_from_zero(galw::Rng& rng, galw::ad::Shape shape) {
  auto t = random_tensor(rng, shape, 0.05, 1.5);
  for (auto& x : t.data()) {
    if (rng.uniform() < 0.5) x = -x;
  }
  return t;
}

// Projects a tensor to a scalar with fixed random weights.
Tensor project(Tape& tape, const Tensor& t, const Tensor& w) { return tape.sum(tape.mul(t, w)); }

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("matmul matches the spec example and its gradients") {
  Tape tape;
  auto a = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  auto b = Tensor::from({2, 1}, {1, 1}, true);
  auto c = tape.matmul(a, b);
  CHECK(c.shape() == galw::ad::Shape{2, 1});
  CHECK(c[0] == 3.0);
  CHECK(c[1] == 7.0);
  tape.backward(tape.sum(c));
  CHECK(a.grad()[0] == 1.0);
  CHECK(a.grad()[3] == 1.0);
  CHECK(b.grad()[0] == 4.0);
  CHECK(b.grad()[1] == 6.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape tape;
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({2, 2});
  CHECK_THROWS_WITH_AS(tape.matmul(a, b), doctest::Contains("[2x3]"), galw::DimensionError);
}

TEST_CASE("every primitive agrees with central differences") {
  galw::Rng rng(42);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), n = 1 + rng.below(4);
    const auto w_out = random_tensor(rng, {m, n});
    const auto w_k = random_tensor(rng, {m, k});

    auto check = [](double err) { CHECK(err < 1e-6); };
    check(fd_check([&](Tape& t, auto& in) { return project(t, t.matmul(in[0], in[1]), w_out); },
                   {random_tensor(rng, {m, k}), random_tensor(rng, {k, n})})
              .max_rel_err);
    check(fd_check([&](Tape& t, auto& in) { return project(t, t.add_bias(in[0], in[1]), w_out); },
                   {random_tensor(rng, {m, n}), random_tensor(rng, {n})})
              .max_rel_err);
    check(fd_check([&](Tape& t, auto& in) { return project(t, t.relu(in[0]), w_k); }, {away_from_zero(rng, {m, k})})
              .max_rel_err);
    check(fd_check([&](Tape& t, auto& in) { return project(t, t.abs(in[0]), w_k); }, {away_from_zero(rng, {m, k})})
              .max_rel_err);
    check(fd_check([&](Tape& t, auto& in) { return project(t, t.add(in[0], in[1]), w_k); },
                   {random_tensor(rng, {m, k}), random_tensor(rng, {m, k})})
              .max_rel_err);
    check(fd_check([&](Tape& t, auto& in) { return project(t, t.sub(in[0], in[1]), w_k); },
                   {random_tensor(rng, {m, k}), random_tensor(rng, {m, k})})
              .max_rel_err);
    check(fd_check([&](Tape& t, auto& in) { return project(t, t.mul(in[0], in[1]), w_k); },
                   {random_tensor(rng, {m, k}), random_tensor(rng, {m, k})})
              .max_rel_err);
    check(fd_check([&](Tape& t, auto& in) { return project(t, t.mul_scalar(in[0], -2.5), w_k); },
                   {random_tensor(rng, {m, k})})
              .max_rel_err);
    check(fd_check([&](Tape& t, auto& in) { return project(t, t.add_scalar(in[0], 0.75), w_k); },
                   {random_tensor(rng, {m, k})})
              .max_rel_err);
    check(fd_check([&](Tape& t, auto& in) { return project(t, t.log(in[0]), w_k); },
                   {random_tensor(rng, {m, k}, 0.2, 3.0)})
              .max_rel_err);
    check(fd_check([&](Tape& t, auto& in) { return project(t, t.exp(in[0]), w_k); }, {random_tensor(rng, {m, k})})
              .max_rel_err);
    check(fd_check([&](Tape& t, auto& in) { return t.mse(in[0], in[1]); },
                   {random_tensor(rng, {m, n}), random_tensor(rng, {m, n})})
              .max_rel_err);
    std::vector<int> labels(m);
    for (auto& l : labels) l = static_cast<int>(rng.below(n + 1));
    check(fd_check([&](Tape& t, auto& in) { return t.softmax_cross_entropy(in[0], labels); },
                   {random_tensor(rng, {m, n + 1}, -3.0, 3.0)})
              .max_rel_err);
  }
}

TEST_CASE("softmax cross-entropy is stable for large logits") {
  Tape tape;
  auto logits = Tensor::from({1, 3}, {1000.0, 0.0, -1000.0}, true);
  std::vector<int> label{1};
  auto loss = tape.softmax_cross_entropy(logits, label);
  CHECK(loss.item() == doctest::Approx(1000.0));
  tape.backward(loss);
  CHECK(logits.grad()[0] == doctest::Approx(1.0));
  CHECK(logits.grad()[1] == doctest::Approx(-1.0));
  CHECK(std::isfinite(logits.grad()[2]));
}

TEST_CASE("cross-entropy rejects labels outside [0, C)") {
  Tape tape;
  auto logits = Tensor::zeros({2, 3}, true);
  std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(tape.softmax_cross_entropy(logits, bad), galw::IndexError);
  std::vector<int> negative{-1, 0};
  CHECK_THROWS_AS(tape.softmax_cross_entropy(logits, negative), galw::IndexError);
}

TEST_CASE("uniform logits give log C") {
  Tape tape;
  auto logits = Tensor::zeros({4, 5}, true);
  std::vector<int> labels{0, 1, 2, 4};
  CHECK(tape.softmax_cross_entropy(logits, labels).item() == doctest::Approx(std::log(5.0)).epsilon(1e-14));
}

TEST_CASE("log rejects nonpositive input") {
  Tape tape;
  CHECK_THROWS_AS(tape.log(Tensor::from({2}, {1.0, 0.0}, true)), galw::DomainError);
  CHECK_THROWS_AS(tape.log(Tensor::from({1}, {-3.0}, true)), galw::DomainError);
}

TEST_CASE("relu and abs use a zero subgradient at the kink") {
  Tape tape;
  auto x = Tensor::from({3}, {-1.0, 0.0, 2.0}, true);
  tape.backward(tape.sum(tape.relu(x)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 1.0);

  Tape tape2;
  auto y = Tensor::from({3}, {-1.0, 0.0, 2.0}, true);
  tape2.backward(tape2.sum(tape2.abs(y)));
  CHECK(y.grad()[0] == -1.0);
  CHECK(y.grad()[1] == 0.0);
  CHECK(y.grad()[2] == 1.0);
}

TEST_CASE("backward requires a scalar seed and a recorded graph") {
  Tape tape;
  auto x = Tensor::from({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(tape.backward(x), galw::ContractError);
  auto y = tape.mul_scalar(x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), galw::ContractError);
  Tape empty;
  CHECK_THROWS_AS(empty.backward(Tensor::scalar(1.0, true)), galw::ContractError);
  CHECK_THROWS_AS(Tensor::zeros({2}).item(), galw::ContractError);
}

TEST_CASE("constants are not recorded") {
  Tape tape;
  auto a = Tensor::from({2}, {1.0, 2.0});
  auto b = tape.exp(tape.mul(a, a));
  CHECK(tape.empty());
  CHECK(b[0] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("leaf gradients accumulate and zero_grad clears them") {
  Tape tape;
  auto x = Tensor::from({1}, {3.0}, true);
  auto y = tape.mul(x, x);
  tape.backward(y);
  CHECK(x.grad()[0] == 6.0);
  tape.backward(y);
  CHECK(x.grad()[0] == 12.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("separate roots of one forward pass give their own gradients") {
  Tape tape;
  auto x = Tensor::from({1}, {2.0}, true);
  auto shared = tape.mul_scalar(x, 3.0);
  auto r1 = tape.mul(shared, shared);  // 9 x^2
  auto r2 = tape.exp(shared);          // e^{3x}
  tape.backward(r1);
  CHECK(x.grad()[0] == doctest::Approx(36.0));
  x.zero_grad();
  tape.backward(r2);
  CHECK(x.grad()[0] == doctest::Approx(3.0 * std::exp(6.0)));
  x.zero_grad();
  auto both = tape.add(r1, r2);
  tape.backward(both);
  CHECK(x.grad()[0] == doctest::Approx(36.0 + 3.0 * std::exp(6.0)));
}

TEST_CASE("gradients are linear in the loss") {
  galw::Rng rng(5);
  auto w0 = random_tensor(rng, {3, 2});
  auto x0 = random_tensor(rng, {4, 3});
  auto grad_of = [&](double c) {
    Tape tape;
    auto w = Tensor::from(w0.shape(), {w0.data().begin(), w0.data().end()}, true);
    auto x = x0.clone();
    auto loss = tape.mul_scalar(tape.sum(tape.exp(tape.matmul(x, w))), c);
    tape.backward(loss);
    return std::vector<double>(w.grad().begin(), w.grad().end());
  };
  auto g1 = grad_of(1.0);
  auto g3 = grad_of(3.0);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g3[i] == doctest::Approx(3.0 * g1[i]).epsilon(1e-14));
}

TEST_CASE("small worked examples") {
  Tape tape;
  auto a = Tensor::from({1, 2}, {1, 2}, true);
  auto b = Tensor::from({2, 1}, {3, 4}, true);
  CHECK(tape.matmul(a, b).item() == 11.0);

  galw::Rng rng(9);
  auto m = random_tensor(rng, {3, 3});
  auto eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto prod = tape.matmul(m, eye);
  for (std::size_t i = 0; i < 9; ++i) CHECK(prod[i] == m[i]);

  auto r = tape.relu(Tensor::from({3}, {-1, 0, 2}, true));
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 2.0);

  std::vector<int> zero{0};
  CHECK(tape.softmax_cross_entropy(Tensor::from({1, 2}, {0, 0}, true), zero).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(tape.softmax_cross_entropy(Tensor::from({1, 2}, {1000, 0}, true), zero).item() < 1e-12);

  auto p = Tensor::from({1, 1}, {2.0}, true);
  CHECK(tape.mse(p, Tensor::from({1, 1}, {0.0})).item() == 4.0);
  CHECK(tape.mse(p, Tensor::from({1, 1}, {2.0})).item() == 0.0);

  CHECK(tape.log(Tensor::scalar(1.0, true)).item() == 0.0);
  CHECK(tape.exp(Tensor::scalar(0.0, true)).item() == 1.0);
  CHECK(tape.abs(Tensor::scalar(-3.0, true)).item() == 3.0);
}

TEST_CASE("d/dx log x at 2 and x + x accumulation") {
  Tape tape;
  auto x = Tensor::scalar(2.0, true);
  tape.backward(tape.log(x));
  CHECK(x.grad()[0] == 0.5);

  Tape t2;
  auto y = Tensor::scalar(1.0, true);
  t2.backward(t2.add(y, y));
  CHECK(y.grad()[0] == 2.0);
}

TEST_CASE("L/sigma^2 + log sigma is stationary at sigma^2 = 2L") {
  Tape tape;
  auto sigma = Tensor::scalar(1.0, true);
  const double L = 0.5;
  auto inv_sq = tape.exp(tape.mul_scalar(tape.log(sigma), -2.0));
  auto g = tape.add(tape.mul_scalar(inv_sq, L), tape.log(sigma));
  CHECK(g.item() == doctest::Approx(0.5).epsilon(1e-15));
  tape.backward(g);
  CHECK(std::abs(sigma.grad()[0]) < 1e-15);
}

TEST_CASE("backward of a combination is the combination of backwards") {
  galw::Rng rng(17);
  const auto w0 = random_tensor(rng, {3, 2}, -2.0, 2.0);
  const auto x0 = random_tensor(rng, {5, 3}, -2.0, 2.0);
  const auto y0 = random_tensor(rng, {5, 2}, -2.0, 2.0);
  std::vector<int> labels{0, 1, 1, 0, 1};
  auto grads = [&](double a, double b) {
    Tape tape;
    auto w = Tensor::from(w0.shape(), {w0.data().begin(), w0.data().end()}, true);
    auto out = tape.matmul(x0, w);
    auto l1 = tape.mse(out, y0);
    auto l2 = tape.softmax_cross_entropy(out, labels);
    tape.backward(tape.add(tape.mul_scalar(l1, a), tape.mul_scalar(l2, b)));
    return std::vector<double>(w.grad().begin(), w.grad().end());
  };
  const auto g1 = grads(1.0, 0.0);
  const auto g2 = grads(0.0, 1.0);
  const auto mix = grads(0.7, -1.3);
  for (std::size_t i = 0; i < mix.size(); ++i) {
    CHECK(mix[i] == doctest::Approx(0.7 * g1[i] - 1.3 * g2[i]).epsilon(1e-12));
  }
  CHECK(grads(0.7, -1.3) == mix);
}

}  // TEST_SUITE
