// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0
//
// galw: train, group, compare and report on synthetic multi-task suites.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "galw/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Grouped adaptive loss weighting lab"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "Run one experiment from a config file");
  train->add_option("config", config_path, "Experiment config (JSON)")->required();

  std::string traces_path, linkage = "complete", output;
  std::size_t num_groups = 0;
  auto* group = app.add_subcommand("group", "Cluster tasks from exported gradient traces");
  group->add_option("traces", traces_path, "traces.json from a phase-1 run")->required();
  group->add_option("-G,--num-groups", num_groups, "Number of groups")->required()->check(CLI::PositiveNumber);
  group->add_option("-l,--linkage", linkage, "single | complete | average")
      ->capture_default_str()
      ->check(CLI::IsMember({"single", "complete", "average"}));
  group->add_option("-o,--output", output, "Where to write grouping.json (default: next to the traces)");

  std::string grid_path;
  auto* compare = app.add_subcommand("compare", "Run a grid of schemes x G x seeds");
  compare->add_option("grid", grid_path, "Grid config (JSON)")->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize a run or comparison directory");
  report->add_option("dir", report_dir, "Output directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : galw::harness::kExitUsage;
  }

  using namespace galw::harness;
  if (*train) return cmd_train(config_path, std::cout, std::cerr);
  if (*group) {
    std::optional<std::filesystem::path> out;
    if (!output.empty()) out = output;
    return cmd_group(traces_path, num_groups, linkage, out, std::cout, std::cerr);
  }
  if (*compare) return cmd_compare(grid_path, std::cout, std::cerr);
  return cmd_report(report_dir, std::cout, std::cerr);
}
