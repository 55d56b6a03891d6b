// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#include "galw/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "galw/error.hpp"
#include "galw/io.hpp"

namespace galw::harness {

namespace fs = std::filesystem;
using config::json;

namespace {

std::size_t sigma_columns(const std::vector<train::EpochTelemetry>& telemetry) {
  std::size_t n = 0;
  for (const auto& r : telemetry) n = std::max(n, r.sigma.size());
  return n;
}

void write_telemetry(const fs::path& dir, const std::vector<train::EpochTelemetry>& telemetry,
                     std::size_t num_tasks, const io::Provenance& prov) {
  io::write_file(dir / "telemetry.csv",
                 io::telemetry_csv(telemetry, num_tasks, sigma_columns(telemetry), prov));
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + io::format_real(v[i]);
  return s;
}

std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string cell(const std::optional<double>& v) { return v ? io::format_exact(*v) : std::string(); }

}  // namespace

fs::path output_root(const std::string& configured) {
  if (const char* env = std::getenv("GALW_OUT"); env && *env) return fs::path(env);
  return fs::path(configured);
}

RunOutcome execute_run(const config::ExperimentConfig& cfg, const fs::path& dir) {
  const io::Provenance prov{cfg.train.seed, config::config_digest(cfg)};
  io::write_file(dir / "resolved_config.json", io::dump(config::resolve(cfg)));

  const auto data = tasks::make_dataset(cfg.train.seed, cfg.n, cfg.d_in, cfg.tasks);
  RunOutcome outcome;
  const auto start = std::chrono::steady_clock::now();
  json summary;
  summary["name"] = cfg.name;
  summary["scheme"] = train::to_string(cfg.train.scheme.kind);
  summary["num_groups"] = cfg.train.scheme.kind == train::SchemeKind::Galw ? cfg.train.num_groups : 0;
  summary.update({{"seed", prov.seed}, {"config_sha256", prov.config_sha256}});
  try {
    auto record = train::run_experiment(cfg.train, cfg.tasks, data);
    write_telemetry(dir, record.telemetry, cfg.tasks.size(), prov);
    if (record.grouping) {
      io::write_file(dir / "grouping.json", io::dump(io::grouping_json(*record.grouping, prov)));
      if (!record.traces.empty()) {
        io::write_file(dir / "traces.json", io::dump(io::traces_json(record.traces, prov)));
      }
      summary["groups"] = record.grouping->groups();
    }
    outcome.final_eval_loss = record.final_eval_loss;
    outcome.final_sigma = record.final_sigma;
    outcome.grouping = record.grouping;
    summary["status"] = "ok";
    summary["final_eval_loss"] = outcome.final_eval_loss;
    summary["final_sigma"] = outcome.final_sigma;
  } catch (const train::DivergenceError& e) {
    write_telemetry(dir, e.telemetry(), cfg.tasks.size(), prov);
    outcome.status = "diverged";
    outcome.message = e.what();
    summary["status"] = "diverged";
    summary["message"] = outcome.message;
  }
  outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  io::write_file(dir / "summary.json", io::dump(summary));
  return outcome;
}

int cmd_train(const fs::path& config_path, std::ostream& out, std::ostream& err) {
  config::ExperimentConfig cfg;
  try {
    cfg = config::load_experiment(config_path);
  } catch (const ConfigError& e) {
    err << "galw train: invalid config " << config_path << ": " << e.what() << "\n";
    return kExitInvalidInput;
  }
  const fs::path dir = output_root(cfg.output_dir);
  try {
    const auto r = execute_run(cfg, dir);
    if (r.status != "ok") {
      err << "galw train: diverged: " << r.message << " (partial telemetry in " << dir.string() << ")\n";
      return kExitDiverged;
    }
    out << "galw train: scheme=" << train::to_string(cfg.train.scheme.kind) << " seed=" << cfg.train.seed;
    if (r.grouping) out << " groups=" << grouping::group_details(*r.grouping);
    out << " eval_loss=[" << join(r.final_eval_loss) << "]";
    if (!r.final_sigma.empty()) out << " sigma=[" << join(r.final_sigma) << "]";
    out << " out=" << dir.string() << "\n";
    return kExitOk;
  } catch (const IoError& e) {
    err << "galw train: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "galw train: " << e.what() << "\n";
    return kExitInvalidInput;
  }
}

int cmd_group(const fs::path& traces_path, std::size_t num_groups, const std::string& linkage,
              const std::optional<fs::path>& output, std::ostream& out, std::ostream& err) {
  io::TraceFile file;
  grouping::Grouping g;
  try {
    file = io::parse_traces(config::read_json_file(traces_path));
    g = grouping::build_grouping(file.traces, num_groups, grouping::parse_linkage(linkage));
  } catch (const Error& e) {
    err << "galw group: " << traces_path.string() << ": " << e.what() << "\n";
    return kExitInvalidInput;
  }
  const fs::path target = output ? *output : traces_path.parent_path() / "grouping.json";
  try {
    io::write_file(target, io::dump(io::grouping_json(g, file.prov)));
  } catch (const IoError& e) {
    err << "galw group: " << e.what() << "\n";
    return kExitIo;
  }
  out << grouping::group_table(g);
  return kExitOk;
}

std::vector<ReportRow> build_report(const std::vector<config::GridRun>& runs,
                                    const std::vector<RunOutcome>& outcomes, std::size_t num_tasks) {
  std::map<std::uint64_t, std::vector<double>> baseline;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].mode == "equal" && outcomes[i].status == "ok" && !baseline.count(runs[i].seed)) {
      baseline[runs[i].seed] = outcomes[i].final_eval_loss;
    }
  }
  std::vector<ReportRow> rows;
  // (label, G) in first-seen order.
  std::vector<std::pair<std::string, std::size_t>> keys;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& run = runs[i];
    const auto& o = outcomes[i];
    ReportRow row;
    row.row_type = "run";
    row.label = run.label;
    row.mode = run.mode;
    row.num_groups = run.num_groups;
    row.seed = run.seed;
    row.status = o.status;
    row.eval_loss.assign(num_tasks, std::nullopt);
    if (o.status == "ok") {
      for (std::size_t t = 0; t < num_tasks; ++t) row.eval_loss[t] = o.final_eval_loss[t];
      if (auto it = baseline.find(run.seed); it != baseline.end()) {
        double s = 0.0;
        for (std::size_t t = 0; t < num_tasks; ++t) s += o.final_eval_loss[t] / it->second[t];
        row.normalized_sum = s;
      }
    }
    const std::pair key{run.label, run.num_groups};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    rows.push_back(std::move(row));
  }
  const std::size_t num_runs = rows.size();
  for (const auto& [label, G] : keys) {
    ReportRow agg;
    agg.row_type = "median";
    agg.label = label;
    agg.num_groups = G;
    agg.eval_loss.assign(num_tasks, std::nullopt);
    std::vector<std::vector<double>> per_task(num_tasks);
    std::vector<double> sums;
    std::size_t ok = 0, total = 0;
    for (std::size_t i = 0; i < num_runs; ++i) {
      const auto& r = rows[i];
      if (r.label != label || r.num_groups != G) continue;
      agg.mode = r.mode;
      ++total;
      if (r.status != "ok") continue;
      ++ok;
      for (std::size_t t = 0; t < num_tasks; ++t) per_task[t].push_back(*r.eval_loss[t]);
      if (r.normalized_sum) sums.push_back(*r.normalized_sum);
    }
    agg.status = std::to_string(ok) + "/" + std::to_string(total);
    for (std::size_t t = 0; t < num_tasks; ++t) agg.eval_loss[t] = median(per_task[t]);
    agg.normalized_sum = median(sums);
    rows.push_back(std::move(agg));
  }
  return rows;
}

std::string report_csv(const std::vector<ReportRow>& rows, std::size_t num_tasks,
                       const std::string& grid_digest, const std::vector<std::uint64_t>& seeds) {
  std::string s = "# galw compare grid_sha256=" + grid_digest + " seeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
  s += "\n# normalized_sum: sum over tasks of eval loss / equal-weighting eval loss (same seed)\n";
  s += "row_type,label,mode,num_groups,seed,status";
  for (std::size_t t = 0; t < num_tasks; ++t) s += ",task_" + std::to_string(t) + "_eval_loss";
  s += ",normalized_sum\n";
  for (const auto& r : rows) {
    s += r.row_type + "," + r.label + "," + r.mode + "," + std::to_string(r.num_groups) + "," +
         (r.seed ? std::to_string(*r.seed) : std::string()) + "," + r.status;
    for (const auto& v : r.eval_loss) s += "," + cell(v);
    s += "," + cell(r.normalized_sum) + "\n";
  }
  return s;
}

std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<ReportRow> rows;
  auto opt = [](const std::string& c) -> std::optional<double> {
    if (c.empty()) return std::nullopt;
    return std::strtod(c.c_str(), nullptr);
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string c;
    std::istringstream ls(line);
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (line.back() == ',') cells.emplace_back();
    if (header.empty()) {
      header = cells;
      if (header.size() < 7 || header[0] != "row_type") throw ContractError("report: bad header");
      continue;
    }
    if (cells.size() != header.size()) throw ContractError("report: ragged row");
    ReportRow r;
    r.row_type = cells[0];
    r.label = cells[1];
    r.mode = cells[2];
    r.num_groups = std::stoul(cells[3]);
    if (!cells[4].empty()) r.seed = std::stoull(cells[4]);
    r.status = cells[5];
    for (std::size_t i = 6; i + 1 < cells.size(); ++i) r.eval_loss.push_back(opt(cells[i]));
    r.normalized_sum = opt(cells.back());
    rows.push_back(std::move(r));
  }
  if (header.empty()) throw ContractError("report: no header");
  return rows;
}

int cmd_compare(const fs::path& grid_path, std::ostream& out, std::ostream& err) {
  config::GridConfig grid;
  std::vector<config::GridRun> runs;
  json grid_doc;
  try {
    grid_doc = config::read_json_file(grid_path);
    grid = config::parse_grid(grid_doc);
    runs = config::expand_grid(grid);
  } catch (const ConfigError& e) {
    err << "galw compare: invalid grid " << grid_path << ": " << e.what() << "\n";
    return kExitInvalidInput;
  }
  const fs::path root = output_root(grid.output_dir);
  const std::size_t num_tasks = runs.front().config.tasks.size();
  for (const auto& r : runs) {
    if (r.config.tasks.size() != num_tasks) {
      err << "galw compare: all runs must share one task list\n";
      return kExitInvalidInput;
    }
  }

  std::vector<RunOutcome> outcomes(runs.size());
  std::atomic<std::size_t> next{0};
  std::mutex out_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        outcomes[i] = execute_run(runs[i].config, root / runs[i].dir_name);
      } catch (const Error& e) {
        outcomes[i].status = "error";
        outcomes[i].message = e.what();
      }
      std::lock_guard lock(out_mu);
      out << "galw compare: " << runs[i].dir_name << " " << outcomes[i].status;
      if (!outcomes[i].message.empty()) out << " (" << outcomes[i].message << ")";
      out << "\n";
    }
  };
  {
    const std::size_t n = std::min(grid.jobs, runs.size());
    std::vector<std::jthread> pool;
    for (std::size_t j = 1; j < n; ++j) pool.emplace_back(worker);
    worker();
  }

  const auto rows = build_report(runs, outcomes, num_tasks);
  std::string timing = "label,num_groups,seed,status,seconds\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    timing += runs[i].label + "," + std::to_string(runs[i].num_groups) + "," + std::to_string(runs[i].seed) +
              "," + outcomes[i].status + "," + io::format_real(outcomes[i].seconds) + "\n";
  }
  try {
    // Parallelism and placement do not change results, so they stay out of
    // the digest.
    json digest_doc = grid_doc;
    digest_doc.erase("jobs");
    digest_doc.erase("output_dir");
    io::write_file(root / "report.csv",
                   report_csv(rows, num_tasks, config::sha256_hex(digest_doc.dump()), grid.seeds));
    io::write_file(root / "timing.csv", timing);
  } catch (const IoError& e) {
    err << "galw compare: " << e.what() << "\n";
    return kExitIo;
  }
  out << "galw compare: wrote " << (root / "report.csv").string() << "\n";
  for (const auto& r : rows) {
    if (r.row_type != "median") continue;
    out << "  " << r.label << (r.num_groups ? " G=" + std::to_string(r.num_groups) : std::string())
        << " runs=" << r.status << " median normalized_sum="
        << (r.normalized_sum ? io::format_real(*r.normalized_sum) : std::string("n/a")) << "\n";
  }
  const bool failed = std::any_of(outcomes.begin(), outcomes.end(), [](const RunOutcome& o) { return o.status != "ok"; });
  return failed ? kExitRunsFailed : kExitOk;
}

int cmd_report(const fs::path& dir, std::ostream& out, std::ostream& err) {
  try {
    if (fs::exists(dir / "report.csv")) {
      const auto rows = parse_report_csv(io::read_file(dir / "report.csv"));
      out << "label            G  runs  median normalized_sum\n";
      for (const auto& r : rows) {
        if (r.row_type != "median") continue;
        std::string label = r.label;
        label.resize(std::max<std::size_t>(label.size(), 16), ' ');
        out << label << ' ' << r.num_groups << "  " << r.status << "  "
            << (r.normalized_sum ? io::format_real(*r.normalized_sum) : std::string("n/a")) << "\n";
      }
      return kExitOk;
    }
    if (fs::exists(dir / "summary.json")) {
      const auto s = config::read_json_file(dir / "summary.json");
      out << "scheme=" << s.value("scheme", "") << " seed=" << s.value("seed", 0) << " status=" << s.value("status", "");
      if (s.contains("groups")) out << " groups=" << s["groups"].dump();
      if (s.contains("final_eval_loss")) out << " eval_loss=" << s["final_eval_loss"].dump();
      out << "\n";
      return kExitOk;
    }
    err << "galw report: no report.csv or summary.json in " << dir.string() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    err << "galw report: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "galw report: " << e.what() << "\n";
    return kExitInvalidInput;
  }
}

}  // namespace galw::harness
