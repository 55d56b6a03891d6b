// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the galw binary. Each returns a process
// exit code and writes diagnostics to `err`.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "galw/config.hpp"

namespace galw::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInvalidInput = 2;  // bad config or traces
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitIo = 4;
inline constexpr int kExitRunsFailed = 5;  // compare finished but some runs failed

/// GALW_OUT when set and nonempty, otherwise `configured`.
std::filesystem::path output_root(const std::string& configured);

struct RunOutcome {
  std::string status = "ok";  // ok | diverged
  std::string message;
  std::vector<double> final_eval_loss;
  std::vector<double> final_sigma;
  std::optional<grouping::Grouping> grouping;
  double seconds = 0.0;
};

/// Trains one experiment and writes telemetry.csv, resolved_config.json and
/// summary.json into `dir`, plus grouping.json and traces.json for GALW.
/// Divergence is reported in the outcome (partial telemetry is still
/// written); I/O failures throw IoError.
RunOutcome execute_run(const config::ExperimentConfig& config, const std::filesystem::path& dir);

int cmd_train(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);

/// Groups previously exported traces. Writes grouping.json next to the
/// traces file unless `output` is given.
int cmd_group(const std::filesystem::path& traces_path, std::size_t num_groups,
              const std::string& linkage, const std::optional<std::filesystem::path>& output,
              std::ostream& out, std::ostream& err);

int cmd_compare(const std::filesystem::path& grid_path, std::ostream& out, std::ostream& err);

int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

struct ReportRow {
  std::string row_type;  // run | median
  std::string label;
  std::string mode;
  std::size_t num_groups = 0;
  std::optional<std::uint64_t> seed;
  std::string status;
  std::vector<std::optional<double>> eval_loss;
  std::optional<double> normalized_sum;
};

/// Per-run rows (normalized against the equal-weighting run of the same
/// seed) followed by one median row per (label, G).
std::vector<ReportRow> build_report(const std::vector<config::GridRun>& runs,
                                    const std::vector<RunOutcome>& outcomes, std::size_t num_tasks);

std::string report_csv(const std::vector<ReportRow>& rows, std::size_t num_tasks,
                       const std::string& grid_digest, const std::vector<std::uint64_t>& seeds);

std::vector<ReportRow> parse_report_csv(const std::string& text);

}  // namespace galw::harness
