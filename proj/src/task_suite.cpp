// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#include "galw/task_suite.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "galw/error.hpp"
#include "galw/random.hpp"

namespace galw::tasks {

namespace {

// Stream ids for derive_seed. Task t uses kMapStream + t and kNoiseStream + t.
constexpr std::uint64_t kInputStream = 1;
constexpr std::uint64_t kSplitStream = 3;
constexpr std::uint64_t kMapStream = 100;
constexpr std::uint64_t kNoiseStream = 10'000;
constexpr std::uint64_t kInitStream = 7;

constexpr std::size_t kFeatureWidth = 16;
// Var(tanh(z)) for z ~ N(0, 1); used to give targets roughly unit variance.
constexpr double kTanhVariance = 0.394294;

}  // namespace

std::string to_string(TaskKind kind) {
  return kind == TaskKind::Classification ? "classification" : "regression";
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "classification") return TaskKind::Classification;
  if (name == "regression") return TaskKind::Regression;
  throw ContractError("unknown task kind '" + name + "'");
}

void validate(const TaskSpec& spec) {
  const std::string who = "task " + std::to_string(spec.id) + ": ";
  if (spec.out_dim == 0) throw ContractError(who + "out_dim must be positive");
  if (spec.kind == TaskKind::Classification && spec.out_dim < 2) {
    throw ContractError(who + "classification needs at least 2 classes");
  }
  if (!(spec.loss_scale > 0.0) || !std::isfinite(spec.loss_scale)) {
    throw ContractError(who + "loss_scale must be positive and finite");
  }
  if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) {
    throw ContractError(who + "noise_std must be nonnegative and finite");
  }
  if (!(spec.margin > 0.0)) throw ContractError(who + "margin must be positive");
}

std::vector<double> RegressionMap::apply(std::span<const double> x) const {
  std::vector<double> phi(features);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (std::size_t f = 0; f < features; ++f) {
    double z = 0.0;
    for (std::size_t j = 0; j < d_in; ++j) z += feature_weights[f * d_in + j] * x[j];
    phi[f] = std::tanh(z * inv_sqrt_d);
  }
  std::vector<double> out(out_dim, 0.0);
  for (std::size_t o = 0; o < out_dim; ++o) {
    for (std::size_t f = 0; f < features; ++f) out[o] += mix[o * features + f] * phi[f];
  }
  return out;
}

std::vector<double> LogitMap::logits(std::span<const double> x) const {
  std::vector<double> out(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t j = 0; j < d_in; ++j) out[c] += weights[c * d_in + j] * x[j];
  }
  return out;
}

Tensor sample_inputs(std::uint64_t seed, std::size_t n, std::size_t d_in) {
  Rng rng(seed);
  std::vector<double> values(n * d_in);
  for (auto& v : values) v = rng.normal();
  return Tensor::from({n, d_in}, std::move(values));
}

RegressionMap sample_regression_map(std::uint64_t seed, std::size_t d_in, std::size_t out_dim) {
  Rng rng(seed);
  RegressionMap map;
  map.d_in = d_in;
  map.features = kFeatureWidth;
  map.out_dim = out_dim;
  map.feature_weights.resize(kFeatureWidth * d_in);
  for (auto& w : map.feature_weights) w = rng.normal();
  map.mix.resize(out_dim * kFeatureWidth);
  const double scale = 1.0 / std::sqrt(kTanhVariance * static_cast<double>(kFeatureWidth));
  for (auto& w : map.mix) w = scale * rng.normal();
  return map;
}

LogitMap sample_logit_map(std::uint64_t seed, std::size_t d_in, std::size_t classes) {
  Rng rng(seed);
  LogitMap map;
  map.d_in = d_in;
  map.classes = classes;
  map.weights.resize(classes * d_in);
  for (auto& w : map.weights) w = rng.normal();
  return map;
}

Tensor regression_targets(const Tensor& inputs, const RegressionMap& map, double noise_std,
                          std::uint64_t noise_seed) {
  const std::size_t n = inputs.rows(), d = inputs.cols();
  if (d != map.d_in) throw DimensionError("regression_targets: input width mismatch");
  Rng rng(noise_seed);
  std::vector<double> out(n * map.out_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto clean = map.apply(inputs.data().subspan(i * d, d));
    for (std::size_t o = 0; o < map.out_dim; ++o) {
      out[i * map.out_dim + o] = clean[o] + noise_std * rng.normal();
    }
  }
  return Tensor::from({n, map.out_dim}, std::move(out));
}

std::vector<int> classification_labels(const Tensor& inputs, const LogitMap& map, double margin,
                                       std::uint64_t noise_seed) {
  const std::size_t n = inputs.rows(), d = inputs.cols();
  if (d != map.d_in) throw DimensionError("classification_labels: input width mismatch");
  Rng rng(noise_seed);
  const double noise_scale = std::isinf(margin) ? 0.0 : 1.0 / margin;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto z = map.logits(inputs.data().subspan(i * d, d));
    for (auto& v : z) v += noise_scale * rng.normal();
    labels[i] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return labels;
}

RegressionTask generate_regression_task(std::uint64_t seed, std::size_t n, std::size_t d_in,
                                        std::size_t out_dim, double noise_std) {
  if (n < 2 || d_in == 0 || out_dim == 0) {
    throw ContractError("generate_regression_task: need n >= 2 and positive dims");
  }
  RegressionTask task;
  task.inputs = sample_inputs(derive_seed(seed, kInputStream), n, d_in);
  task.map = sample_regression_map(derive_seed(seed, kMapStream), d_in, out_dim);
  task.targets = regression_targets(task.inputs, task.map, noise_std, derive_seed(seed, kNoiseStream));
  return task;
}

ClassificationTask generate_classification_task(std::uint64_t seed, std::size_t n,
                                                std::size_t d_in, std::size_t classes,
                                                double margin) {
  if (classes < 2) throw ContractError("generate_classification_task: need C >= 2");
  if (n < 2 || d_in == 0) throw ContractError("generate_classification_task: need n >= 2, d_in >= 1");
  ClassificationTask task;
  task.inputs = sample_inputs(derive_seed(seed, kInputStream), n, d_in);
  task.map = sample_logit_map(derive_seed(seed, kMapStream), d_in, classes);
  task.labels = classification_labels(task.inputs, task.map, margin, derive_seed(seed, kNoiseStream));
  return task;
}

SyntheticDataset make_dataset(std::uint64_t seed, std::size_t n, std::size_t d_in,
                              std::span<const TaskSpec> tasks) {
  if (n < 4 || d_in == 0) throw ContractError("make_dataset: need n >= 4 and d_in >= 1");
  SyntheticDataset data;
  data.seed = seed;
  data.inputs = sample_inputs(derive_seed(seed, kInputStream), n, d_in);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& spec = tasks[t];
    if (spec.id != static_cast<int>(t)) throw ContractError("make_dataset: task ids must be 0..T-1 in order");
    validate(spec);
    const auto map_seed = derive_seed(seed, kMapStream + t);
    const auto noise_seed = derive_seed(seed, kNoiseStream + t);
    if (spec.kind == TaskKind::Regression) {
      auto map = sample_regression_map(map_seed, d_in, spec.out_dim);
      data.targets.emplace_back(regression_targets(data.inputs, map, spec.noise_std, noise_seed));
    } else {
      auto map = sample_logit_map(map_seed, d_in, spec.out_dim);
      data.targets.emplace_back(classification_labels(data.inputs, map, spec.margin, noise_seed));
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kSplitStream));
  rng.shuffle(order.begin(), order.end());
  const auto n_eval = static_cast<std::size_t>(std::llround(kEvalFraction * static_cast<double>(n)));
  data.eval_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_eval));
  data.train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_eval), order.end());
  std::sort(data.eval_idx.begin(), data.eval_idx.end());
  std::sort(data.train_idx.begin(), data.train_idx.end());
  return data;
}

Batch gather(const SyntheticDataset& data, std::span<const std::size_t> rows) {
  const std::size_t d = data.inputs.cols();
  std::vector<double> x(rows.size() * d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(data.inputs.data().begin() + static_cast<std::ptrdiff_t>(rows[r] * d), d,
                x.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  Batch batch;
  batch.inputs = Tensor::from({rows.size(), d}, std::move(x));
  batch.targets.reserve(data.targets.size());
  for (const auto& target : data.targets) {
    if (const auto* labels = std::get_if<std::vector<int>>(&target)) {
      std::vector<int> picked(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) picked[r] = (*labels)[rows[r]];
      batch.targets.emplace_back(std::move(picked));
    } else {
      const auto& values = std::get<Tensor>(target);
      const std::size_t w = values.cols();
      std::vector<double> picked(rows.size() * w);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(values.data().begin() + static_cast<std::ptrdiff_t>(rows[r] * w), w,
                    picked.begin() + static_cast<std::ptrdiff_t>(r * w));
      }
      batch.targets.emplace_back(Tensor::from({rows.size(), w}, std::move(picked)));
    }
  }
  return batch;
}

TargetView view(const Target& target) {
  if (const auto* labels = std::get_if<std::vector<int>>(&target)) {
    return std::span<const int>(*labels);
  }
  return std::get<Tensor>(target);
}

std::vector<Tensor> ModelParams::trunk_tensors() const {
  std::vector<Tensor> out;
  out.reserve(trunk.size() * 2);
  for (const auto& layer : trunk) {
    out.push_back(layer.weight);
    out.push_back(layer.bias);
  }
  return out;
}

std::size_t ModelParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : trunk) n += l.weight.size() + l.bias.size();
  for (const auto& l : heads) n += l.weight.size() + l.bias.size();
  return n;
}

namespace {

Linear make_linear(Rng& rng, std::size_t in, std::size_t out, double gain) {
  std::vector<double> w(in * out);
  const double stddev = std::sqrt(gain / static_cast<double>(in));
  for (auto& v : w) v = stddev * rng.normal();
  return Linear{Tensor::from({in, out}, std::move(w), true), Tensor::zeros({out}, true)};
}

}  // namespace

ModelParams init_model(std::uint64_t seed, std::size_t d_in, std::span<const std::size_t> hidden,
                       std::span<const TaskSpec> tasks) {
  Rng rng(derive_seed(seed, kInitStream));
  ModelParams params;
  std::size_t width = d_in;
  for (auto h : hidden) {
    params.trunk.push_back(make_linear(rng, width, h, 2.0));
    width = h;
  }
  for (const auto& spec : tasks) params.heads.push_back(make_linear(rng, width, spec.out_dim, 1.0));
  return params;
}

std::vector<Tensor> forward(Tape& tape, const ModelParams& params, const Tensor& inputs) {
  Tensor h = inputs;
  for (const auto& layer : params.trunk) {
    h = tape.relu(tape.add_bias(tape.matmul(h, layer.weight), layer.bias));
  }
  std::vector<Tensor> outputs;
  outputs.reserve(params.heads.size());
  for (const auto& head : params.heads) {
    outputs.push_back(tape.add_bias(tape.matmul(h, head.weight), head.bias));
  }
  return outputs;
}

Tensor task_loss(Tape& tape, const TaskSpec& spec, const Tensor& head_output,
                 const TargetView& target) {
  Tensor raw;
  if (spec.kind == TaskKind::Classification) {
    const auto* labels = std::get_if<std::span<const int>>(&target);
    if (!labels) {
      throw ContractError("task " + std::to_string(spec.id) + ": classification task given real targets");
    }
    raw = tape.softmax_cross_entropy(head_output, *labels);
  } else {
    const auto* values = std::get_if<Tensor>(&target);
    if (!values) {
      throw ContractError("task " + std::to_string(spec.id) + ": regression task given class labels");
    }
    raw = tape.mse(head_output, *values);
  }
  return spec.loss_scale == 1.0 ? raw : tape.mul_scalar(raw, spec.loss_scale);
}

namespace {

TaskSpec regression(int id, double noise, double scale) {
  TaskSpec t;
  t.id = id;
  t.kind = TaskKind::Regression;
  t.out_dim = 1;
  t.noise_std = noise;
  t.loss_scale = scale;
  return t;
}

TaskSpec classification(int id, std::size_t classes, double margin, double scale) {
  TaskSpec t;
  t.id = id;
  t.kind = TaskKind::Classification;
  t.out_dim = classes;
  t.margin = margin;
  t.loss_scale = scale;
  return t;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"imbalanced-6", "homoscedastic-2", "two-task", "ten-task"};
}

Preset preset(const std::string& name) {
  Preset p;
  p.name = name;
  if (name == "imbalanced-6") {
    // Pairs share a loss_scale tier. The mixed pair sits in tier 1, where
    // every slope is near zero regardless of task kind.
    p.tasks = {
        regression(0, 3.0, 1.0),        classification(1, 3, 4.0, 1.0),
        regression(2, 1.0, 10.0),       regression(3, 0.5, 10.0),
        classification(4, 3, 4.0, 100.0), classification(5, 3, 4.0, 100.0),
    };
  } else if (name == "homoscedastic-2") {
    p.n = 8192;  // enough rows that training losses track the noise floor
    p.tasks = {regression(0, 1.0, 1.0), regression(1, 3.0, 1.0)};
  } else if (name == "two-task") {
    p.tasks = {regression(0, 0.5, 1.0), classification(1, 3, 4.0, 1.0)};
  } else if (name == "ten-task") {
    p.tasks = {
        regression(0, 0.5, 1.0),      classification(1, 3, 4.0, 1.0),
        regression(2, 1.0, 3.0),      classification(3, 4, 4.0, 3.0),
        regression(4, 0.5, 10.0),     classification(5, 2, 4.0, 10.0),
        regression(6, 0.3, 30.0),     classification(7, 3, 8.0, 30.0),
        regression(8, 0.5, 100.0),    classification(9, 3, 4.0, 100.0),
    };
  } else {
    throw ContractError("unknown dataset preset '" + name + "'");
  }
  return p;
}

}  // namespace galw::tasks
