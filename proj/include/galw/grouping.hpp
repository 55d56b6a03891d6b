// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Task grouping from gradient-magnitude trends: per-task trunk gradient
// magnitude per epoch, its average slope, a sign-preserving sigmoid-of-log
// transform, and 1-D agglomerative clustering into G groups.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "galw/autodiff.hpp"

namespace galw::grouping {

struct GradTrace {
  int task_id = 0;
  std::vector<double> gammas;  // one per epoch
};

struct SlopeSummary {
  int task_id = 0;
  double s = 0.0;
  double s_star = 0.0;
};

enum class Linkage { Single, Complete, Average };

std::string to_string(Linkage linkage);
Linkage parse_linkage(const std::string& name);

/// One agglomeration step: clusters identified by their smallest task id.
struct Merge {
  int first = 0;
  int second = 0;
  double distance = 0.0;
};

struct Grouping {
  std::size_t num_groups = 0;
  // Task id -> group index. Groups are numbered in order of their smallest
  // member, so singleton groups over tasks 0..T-1 get indices 0..T-1.
  std::vector<std::size_t> assignment;
  Linkage linkage = Linkage::Complete;
  std::string strategy = "slope";  // slope | random | explicit
  std::vector<SlopeSummary> slopes;
  std::vector<Merge> merges;

  std::vector<std::vector<int>> groups() const;
  std::size_t num_tasks() const noexcept { return assignment.size(); }
};

/// Mean L2 norm of the gradients held by `shared` (gradient, not parameter,
/// magnitude). Throws ContractError when `shared` is empty.
double gradient_magnitude(std::span<const ad::Tensor> shared);

/// Same, from raw per-tensor gradient buffers.
double gradient_magnitude(std::span<const std::span<const double>> grads);

/// (1/(N-1)) * sum_{n=1}^{N-1} (Gamma_{n+1} - Gamma_n). Requires N >= 2.
double average_slope(const GradTrace& trace);

/// sign(s) * sigmoid(log|s|).
double transform_slope(double s);

Grouping agglomerative_cluster(std::span<const double> values, std::size_t num_groups,
                               Linkage linkage = Linkage::Complete);

Grouping build_grouping(std::span<const GradTrace> traces, std::size_t num_groups,
                        Linkage linkage = Linkage::Complete);

/// Uniformly random partition into exactly `num_groups` nonempty groups.
Grouping random_grouping(std::size_t num_tasks, std::size_t num_groups, std::uint64_t seed);

/// Throws ContractError unless `groups` partitions 0..num_tasks-1.
Grouping explicit_grouping(const std::vector<std::vector<int>>& groups, std::size_t num_tasks);

/// Checks the partition invariants; throws ContractError.
void validate(const Grouping& grouping);

/// "{t0, t1}, {t2}" in group order.
std::string group_details(const Grouping& grouping);

/// Multi-line human-readable table with slopes.
std::string group_table(const Grouping& grouping);

}  // namespace galw::grouping
