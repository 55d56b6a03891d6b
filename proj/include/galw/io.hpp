// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run artifacts: per-epoch telemetry CSV, grouping and gradient-trace JSON.
// Every file carries the run seed and the resolved-config digest.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "galw/grouping.hpp"
#include "galw/trainer.hpp"

namespace galw::io {

using nlohmann::json;

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_sha256;
};

/// printf("%.9g"); non-finite values render as nan / inf / -inf.
std::string format_real(double v);
/// printf("%.17g"), exact for doubles.
std::string format_exact(double v);

/// The column header, without the trailing newline.
std::string telemetry_header(std::size_t num_tasks, std::size_t num_sigmas);

/// Telemetry as CSV text: a `# galw seed=... config_sha256=...` line, the
/// header, then one row per record. Cells that do not apply (gamma when not
/// probed, sigma beyond the record's count) are left empty.
std::string telemetry_csv(std::span<const train::EpochTelemetry> records, std::size_t num_tasks,
                          std::size_t num_sigmas, const Provenance& prov);

struct TelemetryTable {
  Provenance prov;
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;
};

TelemetryTable parse_telemetry_csv(const std::string& text);

json grouping_json(const grouping::Grouping& g, const Provenance& prov);
json traces_json(std::span<const grouping::GradTrace> traces, const Provenance& prov);

struct TraceFile {
  Provenance prov;
  std::vector<grouping::GradTrace> traces;
};

/// Throws ContractError describing the first malformed entry.
TraceFile parse_traces(const json& doc);

/// Two-space indented JSON with a trailing newline.
std::string dump(const json& doc);

/// Writes `text` to `path`, creating parent directories. Throws IoError.
void write_file(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

}  // namespace galw::io
