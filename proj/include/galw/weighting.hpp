// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Loss weighting schemes. Uncertainty-based modes learn one log-variance per
// task (per-task granularity) or per group of tasks (per-group granularity):
//
//   term_t  = L_t / (k_t * sigma_{g(t)}^2)
//   total   = sum_t term_t + sum_g ( log sigma_g + lambda * |sigma_g - 1| )
//
// with lambda = 0 for ULWF. Per-task granularity is the identity grouping.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "galw/autodiff.hpp"

namespace galw::weighting {

using ad::Tape;
using ad::Tensor;

/// Learnable sigma stored as log(sigma^2); sigma = exp(log_var / 2) > 0.
struct SigmaParam {
  Tensor log_var;
  int owner = 0;  // task id or group id

  static SigmaParam make(int owner, double initial_log_var = 0.0);
  double sigma() const;
};

enum class Mode { Equal, Manual, Ulwf, Rulwf };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct WeightingScheme {
  Mode mode = Mode::Equal;
  std::vector<double> manual_weights;  // Manual only, one per task
  double lambda = 1.0;                 // Rulwf only
  // Task id -> sigma index. Empty means per-task (identity).
  std::vector<std::size_t> group_of;

  bool has_sigmas() const noexcept { return mode == Mode::Ulwf || mode == Mode::Rulwf; }
  /// Number of sigma parameters required for `num_tasks` tasks.
  std::size_t num_sigmas(std::size_t num_tasks) const;
};

/// (1 / (k sigma^2)) * L.
Tensor weighted_term(Tape& tape, const Tensor& task_loss, int k, const SigmaParam& sigma);

/// log sigma, computed as log_var / 2.
Tensor log_sigma(Tape& tape, const SigmaParam& sigma);

/// (1 / (k sigma^2)) * L + log sigma. Throws NumericError naming `task_id`
/// when L is not finite.
Tensor weighted_task_loss(Tape& tape, const Tensor& task_loss, int k, const SigmaParam& sigma,
                          int task_id = -1);

/// |sigma - 1|, subgradient 0 at sigma == 1.
Tensor regularizer(Tape& tape, const SigmaParam& sigma);

/// Full weighted objective. `sigmas` must hold scheme.num_sigmas(T) entries
/// for uncertainty modes and may be empty otherwise.
Tensor total_loss(Tape& tape, std::span<const Tensor> task_losses, std::span<const int> k_factors,
                  const WeightingScheme& scheme, std::span<const SigmaParam> sigmas);

std::vector<SigmaParam> make_sigmas(const WeightingScheme& scheme, std::size_t num_tasks);

}  // namespace galw::weighting
