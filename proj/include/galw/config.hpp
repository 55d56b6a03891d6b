// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment and comparison-grid configuration files (JSON). Parsing is
// strict: unknown keys and ill-typed values raise ConfigError naming the
// dotted path of the field.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "galw/task_suite.hpp"
#include "galw/trainer.hpp"

namespace galw::config {

using nlohmann::json;

struct ExperimentConfig {
  std::string name;
  std::string schedule = "desk";  // desk | finetune
  std::string preset;             // dataset preset, may be empty
  std::size_t n = 2048;
  std::size_t d_in = 16;
  std::vector<tasks::TaskSpec> tasks;
  train::TrainConfig train;
  std::string output_dir = "galw_out";
};

/// Strict parse of an experiment document. Validates the training config
/// against the task list, so e.g. G > T is rejected here.
ExperimentConfig parse_experiment(const json& doc);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Every field with defaults expanded. parse_experiment(resolve(c)) == c.
json resolve(const ExperimentConfig& config);

/// SHA-256 (hex) of the resolved config without output_dir, so identical
/// experiments written to different directories share a digest.
std::string config_digest(const ExperimentConfig& config);

std::string sha256_hex(const std::string& bytes);

struct GridScheme {
  std::string label;
  json scheme;  // merged over base.scheme
};

struct GridConfig {
  json base;
  std::vector<GridScheme> schemes;
  std::vector<std::size_t> num_groups{3};
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "galw_compare";
  std::size_t jobs = 1;
};

GridConfig parse_grid(const json& doc);
GridConfig load_grid(const std::filesystem::path& path);

/// One concrete run of a grid.
struct GridRun {
  std::string label;
  std::string mode;
  std::size_t num_groups = 0;  // 0 when the scheme is not grouped
  std::uint64_t seed = 0;
  ExperimentConfig config;
  std::string dir_name;  // relative run directory
};

/// Expands schemes x G (grouped schemes only) x seeds, in that nesting order.
/// Throws ConfigError if a run's config is invalid or no equal-weighting
/// scheme is present (it provides the normalization baseline).
std::vector<GridRun> expand_grid(const GridConfig& grid);

json read_json_file(const std::filesystem::path& path);

}  // namespace galw::config
