// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Train-to-convergence checks that the synthetic tasks are learnable to the
// noise floor by the shared-trunk model, and sigma stability over full
// runs. These take tens of seconds.

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>

#include "galw/trainer.hpp"
#include "support.hpp"

using namespace galw;

namespace {

double converged_eval_loss(const tasks::TaskSpec& task, std::size_t n, std::size_t d_in) {
  const std::vector<tasks::TaskSpec> ts{task};
  const auto data = tasks::make_dataset(1, n, d_in, ts);
  train::TrainConfig c;
  c.epochs_phase2 = 200;
  c.base_lr = 0.05;
  c.warmup_steps = 100;
  c.lr_decay_epochs = {120, 170};
  c.weight_decay = 0.0;
  c.hidden = {64, 64};
  const auto rec = train::run_baseline(c, ts, data, train::SchemeSpec{train::SchemeKind::Equal});
  return rec.final_eval_loss[0];
}

}  // namespace

TEST_SUITE("convergence") {

TEST_CASE("noise-free regression reaches eval mse below 1e-3 in 200 epochs") {
  tasks::TaskSpec t;
  t.noise_std = 0.0;
  // A 4-d input keeps the sample count needed to pin the map down modest.
  const double mse = converged_eval_loss(t, 16384, 4);
  MESSAGE("eval mse " << mse);
  CHECK(mse < 1e-3);
}

TEST_CASE("noise-free 3-class labels reach eval cross-entropy below 0.05 in 200 epochs") {
  tasks::TaskSpec t;
  t.kind = tasks::TaskKind::Classification;
  t.out_dim = 3;
  t.margin = std::numeric_limits<double>::infinity();
  const double ce = converged_eval_loss(t, 16384, 16);
  MESSAGE("eval cross-entropy " << ce);
  CHECK(ce < 0.05);
}

}  // TEST_SUITE

TEST_SUITE("stability") {

TEST_CASE("imbalanced-6, G = 3: every group sigma stays in [0.2, 20]") {
  auto cfg = testing::load_config("configs/imbalanced6_galw.json");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.train.seed = seed;
    const auto data = testing::dataset_for(cfg);
    const auto rec = train::run_galw(cfg.train, cfg.tasks, data);
    for (const auto& row : rec.telemetry) {
      for (double s : row.sigma) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
    }
  }
  MESSAGE("sigma range [" << lo << ", " << hi << "]");
  CHECK(lo >= 0.2);
  CHECK(hi <= 20.0);
}

}  // TEST_SUITE
