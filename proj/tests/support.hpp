// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "galw/config.hpp"
#include "galw/task_suite.hpp"

namespace galw::testing {

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(GALW_SOURCE_DIR) / rel;
}

inline config::ExperimentConfig load_config(const std::string& rel) {
  return config::load_experiment(source_path(rel));
}

inline tasks::SyntheticDataset dataset_for(const config::ExperimentConfig& c) {
  return tasks::make_dataset(c.train.seed, c.n, c.d_in, c.tasks);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  std::random_device rd;
  auto dir = std::filesystem::temp_directory_path() /
             ("galw-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace galw::testing
