// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Compares tape gradients with central differences for a graph rebuilt from
// scratch at every probe point.

#pragma once

#include <functional>
#include <vector>

#include "galw/autodiff.hpp"
#include "oracles.hpp"

namespace galw::testing {

using Builder = std::function<ad::Tensor(ad::Tape&, std::vector<ad::Tensor>&)>;

struct FdReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

/// `inputs` are leaves; each gets requires_grad. The builder must return a
/// scalar and may read the leaves only through the tape.
inline FdReport fd_check(const Builder& build, const std::vector<ad::Tensor>& inputs, double h = 1e-5) {
  std::vector<ad::Tensor> leaves;
  for (const auto& t : inputs) {
    leaves.push_back(ad::Tensor::from(t.shape(), {t.data().begin(), t.data().end()}, true));
  }
  ad::Tape tape;
  auto loss = build(tape, leaves);
  tape.backward(loss);

  FdReport rep;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    std::vector<double> x(leaves[k].data().begin(), leaves[k].data().end());
    auto f = [&](const std::vector<double>& xs) {
      std::vector<ad::Tensor> probe;
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        if (j == k) {
          probe.push_back(ad::Tensor::from(inputs[j].shape(), xs, true));
        } else {
          probe.push_back(ad::Tensor::from(inputs[j].shape(), {inputs[j].data().begin(), inputs[j].data().end()},
                                           true));
        }
      }
      ad::Tape t;
      return build(t, probe).item();
    };
    const auto numeric = oracle::central_diff(f, x, h);
    for (std::size_t i = 0; i < x.size(); ++i) {
      rep.max_rel_err = std::max(rep.max_rel_err, oracle::rel_err(leaves[k].grad()[i], numeric[i]));
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace galw::testing
