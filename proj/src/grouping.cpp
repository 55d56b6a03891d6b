// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#include "galw/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "galw/error.hpp"
#include "galw/random.hpp"

namespace galw::grouping {

std::string to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::Single: return "single";
    case Linkage::Complete: return "complete";
    case Linkage::Average: return "average";
  }
  return "?";
}

Linkage parse_linkage(const std::string& name) {
  if (name == "single") return Linkage::Single;
  if (name == "complete") return Linkage::Complete;
  if (name == "average") return Linkage::Average;
  throw ContractError("unknown linkage '" + name + "' (expected single|complete|average)");
}

std::vector<std::vector<int>> Grouping::groups() const {
  std::vector<std::vector<int>> out(num_groups);
  for (std::size_t t = 0; t < assignment.size(); ++t) out[assignment[t]].push_back(static_cast<int>(t));
  return out;
}

double gradient_magnitude(std::span<const std::span<const double>> grads) {
  if (grads.empty()) throw ContractError("gradient_magnitude: no shared tensors (M = 0)");
  double total = 0.0;
  for (const auto& g : grads) {
    double sq = 0.0;
    for (double v : g) sq += v * v;
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(grads.size());
}

double gradient_magnitude(std::span<const ad::Tensor> shared) {
  std::vector<std::span<const double>> grads;
  grads.reserve(shared.size());
  for (const auto& t : shared) grads.push_back(t.grad());
  return gradient_magnitude(grads);
}

double average_slope(const GradTrace& trace) {
  const auto& g = trace.gammas;
  if (g.size() < 2) {
    throw ContractError("average_slope: task " + std::to_string(trace.task_id) +
                        " trace needs at least 2 epochs, has " + std::to_string(g.size()));
  }
  // The sum telescopes; evaluate the closed form so the result is exact.
  return (g.back() - g.front()) / static_cast<double>(g.size() - 1);
}

double transform_slope(double s) {
  if (s == 0.0 || std::isnan(s)) return 0.0;
  const double mag = std::fabs(s);
  // log of subnormal magnitudes is clamped so the exponent below stays finite.
  const double log_mag = mag < 1e-300 ? -700.0 : std::log(mag);
  const double squashed = 1.0 / (1.0 + std::exp(-log_mag));
  return s > 0.0 ? squashed : -squashed;
}

namespace {

// Canonical relabeling: group index in order of smallest member.
std::vector<std::size_t> canonical_assignment(const std::vector<int>& root_of) {
  std::vector<std::size_t> assignment(root_of.size());
  std::vector<int> label_of_root(root_of.size(), -1);
  int next = 0;
  for (std::size_t t = 0; t < root_of.size(); ++t) {
    const int r = root_of[t];
    if (label_of_root[r] < 0) label_of_root[r] = next++;
    assignment[t] = static_cast<std::size_t>(label_of_root[r]);
  }
  return assignment;
}

}  // namespace

Grouping agglomerative_cluster(std::span<const double> values, std::size_t num_groups,
                               Linkage linkage) {
  const std::size_t T = values.size();
  if (num_groups < 1 || num_groups > T) {
    throw ContractError("agglomerative_cluster: num_groups " + std::to_string(num_groups) +
                        " outside [1, " + std::to_string(T) + "]");
  }
  // Cluster slot i is always identified by its smallest member, which is i:
  // merges fold the higher slot into the lower one.
  std::vector<double> dist(T * T, 0.0);
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t j = 0; j < T; ++j) dist[i * T + j] = std::fabs(values[i] - values[j]);
  }
  std::vector<bool> active(T, true);
  std::vector<std::size_t> size(T, 1);
  std::vector<int> root_of(T);
  std::iota(root_of.begin(), root_of.end(), 0);

  Grouping out;
  out.linkage = linkage;
  for (std::size_t clusters = T; clusters > num_groups; --clusters) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    // Row-major scan over i < j: on equal distance the first pair found is
    // the lexicographically smallest (min id, min id).
    for (std::size_t i = 0; i < T; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < T; ++j) {
        if (!active[j]) continue;
        if (dist[i * T + j] < best) {
          best = dist[i * T + j];
          bi = i;
          bj = j;
        }
      }
    }
    out.merges.push_back(Merge{static_cast<int>(bi), static_cast<int>(bj), best});
    for (std::size_t k = 0; k < T; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double di = dist[bi * T + k], dj = dist[bj * T + k];
      double d = 0.0;
      switch (linkage) {
        case Linkage::Single: d = std::min(di, dj); break;
        case Linkage::Complete: d = std::max(di, dj); break;
        case Linkage::Average:
          d = (static_cast<double>(size[bi]) * di + static_cast<double>(size[bj]) * dj) /
              static_cast<double>(size[bi] + size[bj]);
          break;
      }
      dist[bi * T + k] = dist[k * T + bi] = d;
    }
    active[bj] = false;
    size[bi] += size[bj];
    for (auto& r : root_of) {
      if (r == static_cast<int>(bj)) r = static_cast<int>(bi);
    }
  }
  out.num_groups = num_groups;
  out.assignment = canonical_assignment(root_of);
  return out;
}

Grouping build_grouping(std::span<const GradTrace> traces, std::size_t num_groups, Linkage linkage) {
  if (traces.empty()) throw ContractError("build_grouping: no traces");
  const auto len = traces.front().gammas.size();
  std::vector<SlopeSummary> slopes;
  std::vector<double> values;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    const auto& tr = traces[t];
    if (tr.task_id != static_cast<int>(t)) {
      throw ContractError("build_grouping: traces must be ordered by task id 0..T-1");
    }
    if (tr.gammas.size() != len) {
      throw ContractError("build_grouping: trace lengths differ (task " + std::to_string(t) + ")");
    }
    for (double g : tr.gammas) {
      if (!std::isfinite(g) || g < 0.0) {
        throw ContractError("build_grouping: task " + std::to_string(t) +
                            " has a negative or non-finite gradient magnitude");
      }
    }
    const double s = average_slope(tr);
    const double s_star = transform_slope(s);
    slopes.push_back(SlopeSummary{tr.task_id, s, s_star});
    values.push_back(s_star);
  }
  Grouping g = agglomerative_cluster(values, num_groups, linkage);
  g.slopes = std::move(slopes);
  return g;
}

Grouping random_grouping(std::size_t num_tasks, std::size_t num_groups, std::uint64_t seed) {
  if (num_groups < 1 || num_groups > num_tasks) {
    throw ContractError("random_grouping: num_groups outside [1, T]");
  }
  Rng rng(seed);
  std::vector<int> order(num_tasks);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  // First G shuffled tasks seed one group each; the rest land uniformly.
  std::vector<int> root_of(num_tasks);
  for (std::size_t i = 0; i < num_tasks; ++i) {
    const std::size_t bucket = i < num_groups ? i : static_cast<std::size_t>(rng.below(num_groups));
    root_of[static_cast<std::size_t>(order[i])] = static_cast<int>(bucket);
  }
  Grouping g;
  g.num_groups = num_groups;
  g.assignment = canonical_assignment(root_of);
  g.strategy = "random";
  return g;
}

Grouping explicit_grouping(const std::vector<std::vector<int>>& groups, std::size_t num_tasks) {
  std::vector<int> root_of(num_tasks, -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw ContractError("explicit grouping: group " + std::to_string(g) + " is empty");
    for (int t : groups[g]) {
      if (t < 0 || static_cast<std::size_t>(t) >= num_tasks) {
        throw ContractError("explicit grouping: task id " + std::to_string(t) + " out of range");
      }
      if (root_of[static_cast<std::size_t>(t)] >= 0) {
        throw ContractError("explicit grouping: task " + std::to_string(t) + " appears twice");
      }
      root_of[static_cast<std::size_t>(t)] = static_cast<int>(g);
    }
  }
  std::ostringstream missing;
  for (std::size_t t = 0; t < num_tasks; ++t) {
    if (root_of[t] < 0) missing << (missing.tellp() > 0 ? "," : "") << t;
  }
  if (missing.tellp() > 0) {
    throw ContractError("explicit grouping: uncovered task ids [" + missing.str() + "]");
  }
  Grouping out;
  out.num_groups = groups.size();
  out.assignment = canonical_assignment(root_of);
  out.strategy = "explicit";
  return out;
}

void validate(const Grouping& grouping) {
  if (grouping.num_groups == 0 || grouping.num_groups > grouping.assignment.size()) {
    throw ContractError("grouping: num_groups outside [1, T]");
  }
  std::vector<std::size_t> count(grouping.num_groups, 0);
  for (auto g : grouping.assignment) {
    if (g >= grouping.num_groups) throw ContractError("grouping: group index out of range");
    ++count[g];
  }
  for (std::size_t g = 0; g < count.size(); ++g) {
    if (count[g] == 0) throw ContractError("grouping: group " + std::to_string(g) + " is empty");
  }
}

std::string group_details(const Grouping& grouping) {
  std::ostringstream os;
  const auto groups = grouping.groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g) os << ", ";
    os << '{';
    for (std::size_t i = 0; i < groups[g].size(); ++i) {
      if (i) os << ", ";
      os << 't' << groups[g][i];
    }
    os << '}';
  }
  return os.str();
}

std::string group_table(const Grouping& grouping) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "GN  %-9s  Group Details\n", "linkage");
  os << buf;
  std::snprintf(buf, sizeof buf, "%-3zu %-9s  ", grouping.num_groups, to_string(grouping.linkage).c_str());
  os << buf << group_details(grouping) << '\n';
  if (!grouping.slopes.empty()) {
    os << "\ntask  group  s                  s*\n";
    for (const auto& s : grouping.slopes) {
      std::snprintf(buf, sizeof buf, "t%-4d %-6zu %-18.9g %.9g\n", s.task_id,
                    grouping.assignment[static_cast<std::size_t>(s.task_id)], s.s, s.s_star);
      os << buf;
    }
  }
  return os.str();
}

}  // namespace galw::grouping
