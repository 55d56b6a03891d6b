// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multi-task problems: shared Gaussian inputs, one target stream
// per task, and a shared-trunk / per-task-head MLP.

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "galw/autodiff.hpp"

namespace galw::tasks {

using ad::Tape;
using ad::Tensor;

enum class TaskKind { Classification, Regression };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& name);

struct TaskSpec {
  int id = 0;
  TaskKind kind = TaskKind::Regression;
  std::size_t out_dim = 1;
  double noise_std = 0.0;  // regression only
  double margin = std::numeric_limits<double>::infinity();  // classification only
  double loss_scale = 1.0;

  /// 1 for classification, 2 for regression.
  int k_factor() const noexcept { return kind == TaskKind::Classification ? 1 : 2; }
};

/// Throws ContractError if the spec is malformed.
void validate(const TaskSpec& spec);

/// targets = A . phi(x) with phi(x) = tanh(B x / sqrt(d_in)).
struct RegressionMap {
  std::size_t d_in = 0;
  std::size_t features = 0;
  std::size_t out_dim = 0;
  std::vector<double> feature_weights;  // B, [features x d_in]
  std::vector<double> mix;              // A, [out_dim x features]

  std::vector<double> apply(std::span<const double> x) const;
};

/// labels = argmax(V x + noise / margin).
struct LogitMap {
  std::size_t d_in = 0;
  std::size_t classes = 0;
  std::vector<double> weights;  // V, [classes x d_in]

  std::vector<double> logits(std::span<const double> x) const;
};

Tensor sample_inputs(std::uint64_t seed, std::size_t n, std::size_t d_in);
RegressionMap sample_regression_map(std::uint64_t seed, std::size_t d_in, std::size_t out_dim);
LogitMap sample_logit_map(std::uint64_t seed, std::size_t d_in, std::size_t classes);

/// Noise draws come from `noise_seed` and are scaled by noise_std, so two
/// calls differing only in noise_std see the same standard-normal draws.
Tensor regression_targets(const Tensor& inputs, const RegressionMap& map, double noise_std,
                          std::uint64_t noise_seed);
std::vector<int> classification_labels(const Tensor& inputs, const LogitMap& map, double margin,
                                       std::uint64_t noise_seed);

struct RegressionTask {
  Tensor inputs;   // [n x d_in]
  Tensor targets;  // [n x out_dim]
  RegressionMap map;
};

struct ClassificationTask {
  Tensor inputs;
  std::vector<int> labels;
  LogitMap map;
};

RegressionTask generate_regression_task(std::uint64_t seed, std::size_t n, std::size_t d_in,
                                        std::size_t out_dim, double noise_std);
ClassificationTask generate_classification_task(std::uint64_t seed, std::size_t n,
                                                std::size_t d_in, std::size_t classes,
                                                double margin);

/// Per-task supervision: class labels or real-valued targets.
using Target = std::variant<std::vector<int>, Tensor>;
using TargetView = std::variant<std::span<const int>, Tensor>;

struct SyntheticDataset {
  std::uint64_t seed = 0;
  Tensor inputs;
  std::vector<Target> targets;  // one per task, indexed by task id
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> eval_idx;

  std::size_t num_rows() const { return inputs.rows(); }
};

inline constexpr double kEvalFraction = 0.25;

/// Pure function of (seed, n, d_in, tasks).
SyntheticDataset make_dataset(std::uint64_t seed, std::size_t n, std::size_t d_in,
                              std::span<const TaskSpec> tasks);

/// Rows `rows` of the inputs and of every task's target.
struct Batch {
  Tensor inputs;
  std::vector<Target> targets;
};
Batch gather(const SyntheticDataset& data, std::span<const std::size_t> rows);

TargetView view(const Target& target);

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

struct ModelParams {
  std::vector<Linear> trunk;  // shared parameters
  std::vector<Linear> heads;  // one per task

  /// Trunk weight and bias tensors, in layer order.
  std::vector<Tensor> trunk_tensors() const;
  std::size_t num_parameters() const;
};

ModelParams init_model(std::uint64_t seed, std::size_t d_in, std::span<const std::size_t> hidden,
                       std::span<const TaskSpec> tasks);

/// Trunk (linear + relu per layer) then one linear head per task.
std::vector<Tensor> forward(Tape& tape, const ModelParams& params, const Tensor& inputs);

/// loss_scale * (cross-entropy | mse). Throws ContractError on kind mismatch.
Tensor task_loss(Tape& tape, const TaskSpec& spec, const Tensor& head_output,
                 const TargetView& target);

struct Preset {
  std::string name;
  std::size_t n = 2048;
  std::size_t d_in = 16;
  std::vector<TaskSpec> tasks;
};

/// Known presets: imbalanced-6, homoscedastic-2, two-task, ten-task.
Preset preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace galw::tasks
