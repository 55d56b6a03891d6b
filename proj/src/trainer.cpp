// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#include "galw/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "galw/random.hpp"

namespace galw::train {

namespace {

constexpr std::uint64_t kShuffleStream = 11;
constexpr std::uint64_t kGroupingStream = 13;

}  // namespace

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::Equal: return "equal";
    case SchemeKind::Manual: return "manual";
    case SchemeKind::Ulwf: return "ulwf";
    case SchemeKind::Rulwf: return "rulwf";
    case SchemeKind::Galw: return "galw";
  }
  return "?";
}

SchemeKind parse_scheme_kind(const std::string& name) {
  if (name == "equal") return SchemeKind::Equal;
  if (name == "manual") return SchemeKind::Manual;
  if (name == "ulwf") return SchemeKind::Ulwf;
  if (name == "rulwf") return SchemeKind::Rulwf;
  if (name == "galw") return SchemeKind::Galw;
  throw ContractError("unknown scheme '" + name + "' (expected equal|manual|ulwf|rulwf|galw)");
}

TrainConfig finetune_schedule() {
  TrainConfig c;
  c.epochs_phase1 = 24;
  c.epochs_phase2 = 24;
  c.base_lr = 0.001;
  c.lr_decay_epochs = {16, 22};
  c.lr_decay_factor = 10.0;
  c.warmup_steps = 300;
  c.momentum = 0.9;
  c.weight_decay = 0.0005;
  return c;
}

namespace {

void check_scheme(const SchemeSpec& s, std::size_t num_tasks, const std::string& field) {
  if (s.kind == SchemeKind::Manual) {
    if (s.manual_weights.size() != num_tasks) {
      throw ConfigError(field + ".weights", "manual weighting needs one weight per task (" +
                                                std::to_string(num_tasks) + ")");
    }
    for (double w : s.manual_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw ConfigError(field + ".weights", "manual weights must be positive");
      }
    }
  }
}

}  // namespace

void validate(const TrainConfig& c, std::size_t num_tasks) {
  if (num_tasks == 0) throw ConfigError("tasks", "at least one task required");
  if (c.batch_size == 0) throw ConfigError("train.batch_size", "must be positive");
  if (c.epochs_phase2 == 0) throw ConfigError("train.epochs_phase2", "must be positive");
  if (!(c.base_lr > 0.0) || !std::isfinite(c.base_lr)) throw ConfigError("train.base_lr", "must be positive");
  if (!(c.lr_decay_factor > 0.0)) throw ConfigError("train.lr_decay_factor", "must be positive");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("train.momentum", "must be in [0, 1)");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("train.weight_decay", "must be nonnegative");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) throw ConfigError("scheme.lambda", "must be nonnegative");
  if (c.phase1_lr_decay_epochs) {
    const auto& m = *c.phase1_lr_decay_epochs;
    for (std::size_t i = 1; i < m.size(); ++i) {
      if (m[i] <= m[i - 1]) throw ConfigError("train.phase1_lr_decay_epochs", "must be strictly increasing");
    }
  }
  for (std::size_t i = 1; i < c.lr_decay_epochs.size(); ++i) {
    if (c.lr_decay_epochs[i] <= c.lr_decay_epochs[i - 1]) {
      throw ConfigError("train.lr_decay_epochs", "must be strictly increasing");
    }
  }
  if (c.hidden.empty()) throw ConfigError("model.hidden", "trunk needs at least one layer");
  for (auto h : c.hidden) {
    if (h == 0) throw ConfigError("model.hidden", "layer widths must be positive");
  }
  check_scheme(c.scheme, num_tasks, "scheme");
  check_scheme(c.phase1_scheme, num_tasks, "scheme.phase1");
  if (c.phase1_scheme.kind == SchemeKind::Galw) {
    throw ConfigError("scheme.phase1", "phase-1 scheme cannot itself be grouped");
  }
  if (c.scheme.kind == SchemeKind::Galw) {
    if (c.scheme.strategy == GroupingStrategy::Explicit) {
      if (c.scheme.explicit_groups.size() != c.num_groups) {
        throw ConfigError("scheme.grouping", "explicit groups must number scheme.num_groups");
      }
    }
    if (c.num_groups < 1 || c.num_groups > num_tasks) {
      throw ConfigError("scheme.num_groups", "G = " + std::to_string(c.num_groups) +
                                                 " outside [1, T = " + std::to_string(num_tasks) + "]");
    }
    if (c.scheme.strategy == GroupingStrategy::Slope && c.epochs_phase1 < 2) {
      throw ConfigError("train.epochs_phase1", "slope grouping needs at least 2 phase-1 epochs");
    }
  }
}

double lr_at(std::size_t step, std::size_t epoch, const TrainConfig& config) {
  double lr = config.base_lr;
  if (config.warmup_steps > 0 && step < config.warmup_steps) {
    lr *= static_cast<double>(std::max<std::size_t>(step, 1)) / static_cast<double>(config.warmup_steps);
  }
  for (auto milestone : config.lr_decay_epochs) {
    if (epoch >= milestone) lr /= config.lr_decay_factor;
  }
  return lr;
}

void sgd_step(std::span<ParamRef> params, double lr, double momentum, double weight_decay,
              SgdState& state) {
  if (state.velocity.empty()) {
    state.velocity.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) state.velocity[i].assign(params[i].tensor.size(), 0.0);
  }
  if (state.velocity.size() != params.size()) {
    throw ContractError("sgd_step: optimizer state does not match parameter list");
  }
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("sgd_step: non-finite gradient in " + p.name);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto data = p.tensor.data();
    auto grad = p.tensor.grad();
    auto& v = state.velocity[i];
    const double wd = p.decay ? weight_decay : 0.0;
    for (std::size_t j = 0; j < data.size(); ++j) {
      v[j] = momentum * v[j] + (grad[j] + wd * data[j]);
      data[j] -= lr * v[j];
    }
  }
}

std::vector<double> evaluate(const ModelParams& params, std::span<const TaskSpec> tasks,
                             const SyntheticDataset& data) {
  const auto batch = tasks::gather(data, data.eval_idx);
  ad::Tape tape;
  const auto outputs = tasks::forward(tape, params, batch.inputs);
  std::vector<double> losses(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    losses[t] = tasks::task_loss(tape, tasks[t], outputs[t], tasks::view(batch.targets[t])).item();
  }
  return losses;
}

namespace {

weighting::WeightingScheme to_weighting(const SchemeSpec& spec, double lambda,
                                        const Grouping* grouping) {
  weighting::WeightingScheme w;
  switch (spec.kind) {
    case SchemeKind::Equal: w.mode = weighting::Mode::Equal; break;
    case SchemeKind::Manual:
      w.mode = weighting::Mode::Manual;
      w.manual_weights = spec.manual_weights;
      break;
    case SchemeKind::Ulwf: w.mode = weighting::Mode::Ulwf; w.lambda = 0.0; break;
    case SchemeKind::Rulwf: w.mode = weighting::Mode::Rulwf; w.lambda = lambda; break;
    case SchemeKind::Galw:
      w.mode = weighting::Mode::Rulwf;
      w.lambda = lambda;
      if (!grouping) throw ContractError("grouped weighting requires a grouping");
      w.group_of = grouping->assignment;
      break;
  }
  return w;
}

std::vector<ParamRef> param_refs(const ModelParams& params,
                                 const std::vector<weighting::SigmaParam>& sigmas) {
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < params.trunk.size(); ++i) {
    refs.push_back({"trunk." + std::to_string(i) + ".weight", params.trunk[i].weight, true});
    refs.push_back({"trunk." + std::to_string(i) + ".bias", params.trunk[i].bias, true});
  }
  for (std::size_t i = 0; i < params.heads.size(); ++i) {
    refs.push_back({"head." + std::to_string(i) + ".weight", params.heads[i].weight, true});
    refs.push_back({"head." + std::to_string(i) + ".bias", params.heads[i].bias, true});
  }
  for (const auto& s : sigmas) refs.push_back({"sigma." + std::to_string(s.owner), s.log_var, false});
  return refs;
}

void zero_grads(std::span<ParamRef> refs) {
  for (auto& r : refs) r.tensor.zero_grad();
}

PhaseResult run_phase(const TrainConfig& config, std::span<const TaskSpec> tasks,
                      const SyntheticDataset& data, const weighting::WeightingScheme& scheme,
                      std::size_t epochs, int phase, bool probe,
                      std::vector<EpochTelemetry> prior_telemetry = {}) {
  const std::size_t T = tasks.size();
  if (data.targets.size() != T) throw ContractError("dataset and task list disagree on task count");
  PhaseResult result;
  result.params = tasks::init_model(config.seed, data.inputs.cols(), config.hidden, tasks);
  result.sigmas = weighting::make_sigmas(scheme, T);
  auto refs = param_refs(result.params, result.sigmas);
  const auto trunk = result.params.trunk_tensors();
  std::vector<int> k(T);
  for (std::size_t t = 0; t < T; ++t) k[t] = tasks[t].k_factor();

  if (probe) {
    result.traces.resize(T);
    for (std::size_t t = 0; t < T; ++t) result.traces[t].task_id = static_cast<int>(t);
  }

  SgdState state;
  Rng rng(derive_seed(config.seed, kShuffleStream));
  std::vector<std::size_t> order = data.train_idx;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    std::vector<double> train_acc(T, 0.0), gamma_acc(T, 0.0);
    double total_acc = 0.0;
    std::size_t batches = 0;
    double lr = 0.0;

    auto telemetry_row = [&](double total) {
      EpochTelemetry row;
      row.phase = phase;
      row.epoch = epoch + 1;
      row.lr = lr;
      row.total_loss = total;
      const double nb = static_cast<double>(std::max<std::size_t>(batches, 1));
      row.train_loss.resize(T);
      for (std::size_t t = 0; t < T; ++t) row.train_loss[t] = train_acc[t] / nb;
      row.eval_loss = evaluate(result.params, tasks, data);
      if (probe) {
        row.gamma.resize(T);
        for (std::size_t t = 0; t < T; ++t) row.gamma[t] = gamma_acc[t] / nb;
      }
      for (const auto& s : result.sigmas) row.sigma.push_back(s.sigma());
      return row;
    };
    auto diverge = [&](const std::string& why, double total) {
      auto rows = std::move(prior_telemetry);
      rows.insert(rows.end(), result.telemetry.begin(), result.telemetry.end());
      rows.push_back(telemetry_row(total));
      throw DivergenceError("phase " + std::to_string(phase) + " epoch " + std::to_string(epoch + 1) +
                                ": " + why,
                            std::move(rows));
    };

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      ++step;
      lr = lr_at(step, epoch, config);
      const auto batch = tasks::gather(data, rows);

      ad::Tape tape;
      const auto outputs = tasks::forward(tape, result.params, batch.inputs);
      std::vector<ad::Tensor> losses(T);
      for (std::size_t t = 0; t < T; ++t) {
        losses[t] = tasks::task_loss(tape, tasks[t], outputs[t], tasks::view(batch.targets[t]));
        if (!std::isfinite(losses[t].item())) {
          diverge("task " + std::to_string(t) + " loss is not finite", losses[t].item());
        }
      }
      if (probe) {
        for (std::size_t t = 0; t < T; ++t) {
          zero_grads(refs);
          tape.backward(losses[t]);
          gamma_acc[t] += grouping::gradient_magnitude(trunk);
        }
      }

      const auto total = weighting::total_loss(tape, losses, k, scheme, result.sigmas);
      if (!std::isfinite(total.item())) diverge("total loss is not finite", total.item());
      zero_grads(refs);
      tape.backward(total);
      try {
        sgd_step(refs, lr, config.momentum, config.weight_decay, state);
      } catch (const NumericError& e) {
        diverge(e.what(), total.item());
      }

      for (std::size_t t = 0; t < T; ++t) train_acc[t] += losses[t].item();
      total_acc += total.item();
      ++batches;
    }
    result.telemetry.push_back(telemetry_row(total_acc / static_cast<double>(batches)));
    if (probe) {
      for (std::size_t t = 0; t < T; ++t) result.traces[t].gammas.push_back(result.telemetry.back().gamma[t]);
    }
  }
  return result;
}

}  // namespace

PhaseResult train_phase1(const TrainConfig& config, std::span<const TaskSpec> tasks,
                         const SyntheticDataset& data, TrainOptions options) {
  const auto scheme = to_weighting(config.phase1_scheme, config.lambda, nullptr);
  if (!config.phase1_lr_decay_epochs) {
    return run_phase(config, tasks, data, scheme, config.epochs_phase1, 1, options.probe_gradients);
  }
  TrainConfig c = config;
  c.lr_decay_epochs = *config.phase1_lr_decay_epochs;
  return run_phase(c, tasks, data, scheme, c.epochs_phase1, 1, options.probe_gradients);
}

namespace {

PhaseResult phase2_impl(const TrainConfig& config, std::span<const TaskSpec> tasks,
                        const SyntheticDataset& data, const Grouping& grouping,
                        std::vector<EpochTelemetry> prior) {
  grouping::validate(grouping);
  if (grouping.num_tasks() != tasks.size()) {
    throw ContractError("train_phase2: grouping covers " + std::to_string(grouping.num_tasks()) +
                        " tasks, suite has " + std::to_string(tasks.size()));
  }
  SchemeSpec grouped{SchemeKind::Galw};
  const auto scheme = to_weighting(grouped, config.lambda, &grouping);
  return run_phase(config, tasks, data, scheme, config.epochs_phase2, 2, false, std::move(prior));
}

}  // namespace

PhaseResult train_phase2(const TrainConfig& config, std::span<const TaskSpec> tasks,
                         const SyntheticDataset& data, const Grouping& grouping) {
  return phase2_impl(config, tasks, data, grouping, {});
}

ExperimentRecord run_galw(const TrainConfig& config, std::span<const TaskSpec> tasks,
                          const SyntheticDataset& data) {
  validate(config, tasks.size());
  ExperimentRecord record;
  record.scheme = config.scheme;
  record.num_groups = config.num_groups;

  Grouping grouping;
  switch (config.scheme.strategy) {
    case GroupingStrategy::Slope: {
      auto p1 = train_phase1(config, tasks, data);
      record.telemetry = std::move(p1.telemetry);
      record.traces = std::move(p1.traces);
      grouping = grouping::build_grouping(record.traces, config.num_groups, config.linkage);
      break;
    }
    case GroupingStrategy::Random:
      grouping = grouping::random_grouping(tasks.size(), config.num_groups,
                                           derive_seed(config.seed, kGroupingStream));
      grouping.linkage = config.linkage;
      break;
    case GroupingStrategy::Explicit:
      grouping = grouping::explicit_grouping(config.scheme.explicit_groups, tasks.size());
      grouping.linkage = config.linkage;
      break;
  }

  auto p2 = phase2_impl(config, tasks, data, grouping, record.telemetry);
  record.telemetry.insert(record.telemetry.end(), p2.telemetry.begin(), p2.telemetry.end());
  record.grouping = std::move(grouping);
  record.final_eval_loss = record.telemetry.back().eval_loss;
  record.final_sigma = record.telemetry.back().sigma;
  record.params = std::move(p2.params);
  return record;
}

ExperimentRecord run_baseline(const TrainConfig& config, std::span<const TaskSpec> tasks,
                              const SyntheticDataset& data, const SchemeSpec& scheme) {
  if (scheme.kind == SchemeKind::Galw) throw ContractError("run_baseline: grouped scheme");
  TrainConfig c = config;
  c.scheme = scheme;
  validate(c, tasks.size());
  const auto weights = to_weighting(scheme, c.lambda, nullptr);
  auto phase = run_phase(c, tasks, data, weights, c.epochs_phase2, 1, false);
  ExperimentRecord record;
  record.scheme = scheme;
  record.telemetry = std::move(phase.telemetry);
  record.final_eval_loss = record.telemetry.back().eval_loss;
  record.final_sigma = record.telemetry.back().sigma;
  record.params = std::move(phase.params);
  return record;
}

ExperimentRecord run_experiment(const TrainConfig& config, std::span<const TaskSpec> tasks,
                                const SyntheticDataset& data) {
  if (config.scheme.kind == SchemeKind::Galw) return run_galw(config, tasks, data);
  return run_baseline(config, tasks, data, config.scheme);
}

}  // namespace galw::train
