// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#include "galw/weighting.hpp"

#include <cmath>
#include <sstream>

#include "galw/error.hpp"

namespace galw::weighting {

SigmaParam SigmaParam::make(int owner, double initial_log_var) {
  return SigmaParam{Tensor::scalar(initial_log_var, true), owner};
}

double SigmaParam::sigma() const { return std::exp(0.5 * log_var.item()); }

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Equal: return "equal";
    case Mode::Manual: return "manual";
    case Mode::Ulwf: return "ulwf";
    case Mode::Rulwf: return "rulwf";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  if (name == "equal") return Mode::Equal;
  if (name == "manual") return Mode::Manual;
  if (name == "ulwf") return Mode::Ulwf;
  if (name == "rulwf") return Mode::Rulwf;
  throw ContractError("unknown weighting mode '" + name + "'");
}

std::size_t WeightingScheme::num_sigmas(std::size_t num_tasks) const {
  if (!has_sigmas()) return 0;
  if (group_of.empty()) return num_tasks;
  std::size_t g = 0;
  for (auto v : group_of) g = std::max(g, v + 1);
  return g;
}

Tensor weighted_term(Tape& tape, const Tensor& task_loss, int k, const SigmaParam& sigma) {
  if (k != 1 && k != 2) throw ContractError("weighted_term: k must be 1 or 2");
  // exp(-log_var) == 1 / sigma^2
  Tensor precision = tape.exp(tape.mul_scalar(sigma.log_var, -1.0));
  Tensor scaled = tape.mul(precision, task_loss);
  return k == 1 ? scaled : tape.mul_scalar(scaled, 1.0 / static_cast<double>(k));
}

Tensor log_sigma(Tape& tape, const SigmaParam& sigma) {
  return tape.mul_scalar(sigma.log_var, 0.5);
}

namespace {

void require_finite(const Tensor& loss, int task_id) {
  if (!loss.is_scalar() || !std::isfinite(loss.item())) {
    throw NumericError("task " + std::to_string(task_id) + ": non-finite task loss");
  }
}

}  // namespace

Tensor weighted_task_loss(Tape& tape, const Tensor& task_loss, int k, const SigmaParam& sigma,
                          int task_id) {
  require_finite(task_loss, task_id);
  return tape.add(weighted_term(tape, task_loss, k, sigma), log_sigma(tape, sigma));
}

Tensor regularizer(Tape& tape, const SigmaParam& sigma) {
  Tensor s = tape.exp(tape.mul_scalar(sigma.log_var, 0.5));
  return tape.abs(tape.add_scalar(s, -1.0));
}

Tensor total_loss(Tape& tape, std::span<const Tensor> task_losses, std::span<const int> k_factors,
                  const WeightingScheme& scheme, std::span<const SigmaParam> sigmas) {
  const std::size_t T = task_losses.size();
  if (T == 0) throw ContractError("total_loss: no task losses");
  if (k_factors.size() != T) throw ContractError("total_loss: one k factor per task required");

  if (scheme.mode == Mode::Equal || scheme.mode == Mode::Manual) {
    if (scheme.mode == Mode::Manual) {
      if (scheme.manual_weights.size() != T) {
        throw ContractError("total_loss: manual mode needs " + std::to_string(T) + " weights, got " +
                            std::to_string(scheme.manual_weights.size()));
      }
      for (double w : scheme.manual_weights) {
        if (!(w > 0.0)) throw ContractError("total_loss: manual weights must be positive");
      }
    }
    Tensor total;
    for (std::size_t t = 0; t < T; ++t) {
      Tensor term = scheme.mode == Mode::Manual
                        ? tape.mul_scalar(task_losses[t], scheme.manual_weights[t])
                        : task_losses[t];
      total = total.defined() ? tape.add(total, term) : term;
    }
    return total;
  }

  std::vector<std::size_t> group_of = scheme.group_of;
  if (group_of.empty()) {
    group_of.resize(T);
    for (std::size_t t = 0; t < T; ++t) group_of[t] = t;
  }
  const std::size_t G = sigmas.size();
  std::vector<bool> used(G, false);
  std::ostringstream uncovered;
  bool bad = group_of.size() != T;
  bool listed = false;
  for (std::size_t t = 0; t < T; ++t) {
    if (t >= group_of.size() || group_of[t] >= G) {
      uncovered << (listed ? "," : "") << t;
      listed = bad = true;
    } else {
      used[group_of[t]] = true;
    }
  }
  if (bad) {
    throw ContractError("total_loss: " + std::to_string(G) + " sigmas do not cover tasks [" +
                        uncovered.str() + "]");
  }
  for (std::size_t g = 0; g < G; ++g) {
    if (!used[g]) throw ContractError("total_loss: sigma " + std::to_string(g) + " owns no task");
  }

  const double lambda = scheme.mode == Mode::Ulwf ? 0.0 : scheme.lambda;
  if (!(lambda >= 0.0)) throw ContractError("total_loss: lambda must be nonnegative");

  Tensor total;
  for (std::size_t t = 0; t < T; ++t) {
    require_finite(task_losses[t], static_cast<int>(t));
    Tensor term = weighted_term(tape, task_losses[t], k_factors[t], sigmas[group_of[t]]);
    total = total.defined() ? tape.add(total, term) : term;
  }
  for (std::size_t g = 0; g < G; ++g) {
    Tensor penalty = log_sigma(tape, sigmas[g]);
    if (lambda > 0.0) {
      penalty = tape.add(penalty, tape.mul_scalar(regularizer(tape, sigmas[g]), lambda));
    }
    total = tape.add(total, penalty);
  }
  return total;
}

std::vector<SigmaParam> make_sigmas(const WeightingScheme& scheme, std::size_t num_tasks) {
  std::vector<SigmaParam> out;
  const auto n = scheme.num_sigmas(num_tasks);
  out.reserve(n);
  for (std::size_t g = 0; g < n; ++g) out.push_back(SigmaParam::make(static_cast<int>(g)));
  return out;
}

}  // namespace galw::weighting
