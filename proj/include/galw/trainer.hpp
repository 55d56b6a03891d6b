// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training loops: a phase that measures per-task gradient-magnitude traces,
// a phase that retrains from scratch with grouped uncertainty weighting, and
// single-phase baseline runs.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "galw/error.hpp"
#include "galw/grouping.hpp"
#include "galw/task_suite.hpp"
#include "galw/weighting.hpp"

namespace galw::train {

using grouping::GradTrace;
using grouping::Grouping;
using tasks::ModelParams;
using tasks::SyntheticDataset;
using tasks::TaskSpec;

enum class SchemeKind { Equal, Manual, Ulwf, Rulwf, Galw };

std::string to_string(SchemeKind kind);
SchemeKind parse_scheme_kind(const std::string& name);

enum class GroupingStrategy { Slope, Random, Explicit };

struct SchemeSpec {
  SchemeKind kind = SchemeKind::Equal;
  std::vector<double> manual_weights{};  // Manual
  // Galw only: how phase-2 groups are formed.
  GroupingStrategy strategy = GroupingStrategy::Slope;
  std::vector<std::vector<int>> explicit_groups{};
};

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t epochs_phase1 = 40;
  std::size_t epochs_phase2 = 40;
  std::size_t batch_size = 64;
  double base_lr = 0.05;
  std::vector<std::size_t> lr_decay_epochs{27, 37};  // 0-based epoch indices
  double lr_decay_factor = 10.0;                     // lr divided by this per milestone
  // Phase 1 milestones when they should differ from phase 2's.
  std::optional<std::vector<std::size_t>> phase1_lr_decay_epochs;
  std::size_t warmup_steps = 300;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double lambda = 1.0;
  std::size_t num_groups = 3;
  grouping::Linkage linkage = grouping::Linkage::Complete;
  SchemeSpec phase1_scheme{SchemeKind::Equal};
  SchemeSpec scheme{SchemeKind::Galw};
  std::vector<std::size_t> hidden{64, 32};
};

/// Throws ConfigError naming the first invalid field.
void validate(const TrainConfig& config, std::size_t num_tasks);

/// A short fine-tuning schedule for pretrained backbones: 24 epochs, lr
/// 0.001, /10 at epochs 16 and 22.
TrainConfig finetune_schedule();

struct EpochTelemetry {
  int phase = 1;
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double total_loss = 0.0;
  std::vector<double> train_loss;  // per task, mean over batches
  std::vector<double> eval_loss;   // per task, on the eval split
  std::vector<double> gamma;       // per task; empty when not probed
  std::vector<double> sigma;       // per sigma parameter; empty when none
};

/// Linear warmup over steps 1..warmup_steps (step 1 -> base/warmup), then
/// base divided by decay_factor once per milestone with epoch >= milestone.
double lr_at(std::size_t step, std::size_t epoch, const TrainConfig& config);

struct ParamRef {
  std::string name;
  ad::Tensor tensor;
  bool decay = true;  // false for sigma parameters
};

struct SgdState {
  std::vector<std::vector<double>> velocity;
};

/// v <- momentum * v + (grad + wd * p); p <- p - lr * v. Weight decay is
/// applied only to params with decay == true. Throws NumericError naming the
/// parameter if a gradient is not finite.
void sgd_step(std::span<ParamRef> params, double lr, double momentum, double weight_decay,
              SgdState& state);

/// Training aborted because the loss or a gradient became non-finite. Holds
/// the telemetry recorded up to the failure.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::vector<EpochTelemetry> telemetry)
      : NumericError(what), telemetry_(std::move(telemetry)) {}
  const std::vector<EpochTelemetry>& telemetry() const noexcept { return telemetry_; }

 private:
  std::vector<EpochTelemetry> telemetry_;
};

struct TrainOptions {
  bool probe_gradients = true;
};

struct PhaseResult {
  ModelParams params;
  std::vector<weighting::SigmaParam> sigmas;
  std::vector<EpochTelemetry> telemetry;
  std::vector<GradTrace> traces;  // empty unless probed
};

/// First training: phase1_scheme, probing each task's isolated trunk gradient.
PhaseResult train_phase1(const TrainConfig& config, std::span<const TaskSpec> tasks,
                         const SyntheticDataset& data, TrainOptions options = {});

/// Second training from re-initialized parameters with one sigma per group.
PhaseResult train_phase2(const TrainConfig& config, std::span<const TaskSpec> tasks,
                         const SyntheticDataset& data, const Grouping& grouping);

struct ExperimentRecord {
  SchemeSpec scheme;
  std::size_t num_groups = 0;  // 0 for ungrouped schemes
  std::vector<EpochTelemetry> telemetry;  // every phase, in order
  std::vector<GradTrace> traces;
  std::optional<Grouping> grouping;
  std::vector<double> final_eval_loss;
  std::vector<double> final_sigma;
  ModelParams params;
};

/// Phase 1, grouping, phase 2.
ExperimentRecord run_galw(const TrainConfig& config, std::span<const TaskSpec> tasks,
                          const SyntheticDataset& data);

/// Single-phase training under a non-grouped scheme.
ExperimentRecord run_baseline(const TrainConfig& config, std::span<const TaskSpec> tasks,
                              const SyntheticDataset& data, const SchemeSpec& scheme);

/// Dispatches on config.scheme.kind.
ExperimentRecord run_experiment(const TrainConfig& config, std::span<const TaskSpec> tasks,
                                const SyntheticDataset& data);

/// Per-task L_ori on the eval split.
std::vector<double> evaluate(const ModelParams& params, std::span<const TaskSpec> tasks,
                             const SyntheticDataset& data);

}  // namespace galw::train
