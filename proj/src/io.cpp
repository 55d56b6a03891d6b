// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#include "galw/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "galw/error.hpp"

namespace galw::io {

namespace {

std::string format_with(const char* fmt, double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

json provenance_fields(const Provenance& prov) {
  return {{"seed", prov.seed}, {"config_sha256", prov.config_sha256}};
}

// Hand-written trace files may omit provenance; seed 0 and an empty digest
// then flow into the grouping artifact.
Provenance read_provenance(const json& doc) {
  Provenance p;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ContractError("traces: invalid 'seed'");
    p.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("config_sha256")) {
    if (!doc["config_sha256"].is_string()) throw ContractError("traces: invalid 'config_sha256'");
    p.config_sha256 = doc["config_sha256"].get<std::string>();
  }
  return p;
}

}  // namespace

std::string format_real(double v) { return format_with("%.9g", v); }
std::string format_exact(double v) { return format_with("%.17g", v); }

std::string telemetry_header(std::size_t num_tasks, std::size_t num_sigmas) {
  std::string h = "phase,epoch,lr,total_loss";
  for (std::size_t t = 0; t < num_tasks; ++t) {
    const auto id = std::to_string(t);
    h += ",task_" + id + "_loss,task_" + id + "_eval_loss,task_" + id + "_gamma";
  }
  for (std::size_t g = 0; g < num_sigmas; ++g) h += ",sigma_" + std::to_string(g);
  return h;
}

std::string telemetry_csv(std::span<const train::EpochTelemetry> records, std::size_t num_tasks,
                          std::size_t num_sigmas, const Provenance& prov) {
  std::string out = "# galw seed=" + std::to_string(prov.seed) + " config_sha256=" + prov.config_sha256 + "\n";
  out += telemetry_header(num_tasks, num_sigmas) + "\n";
  for (const auto& r : records) {
    if (r.train_loss.size() != num_tasks || r.eval_loss.size() != num_tasks ||
        (!r.gamma.empty() && r.gamma.size() != num_tasks) || r.sigma.size() > num_sigmas) {
      throw ContractError("telemetry_csv: record does not match the column layout");
    }
    out += std::to_string(r.phase) + "," + std::to_string(r.epoch) + "," + format_real(r.lr) + "," +
           format_real(r.total_loss);
    for (std::size_t t = 0; t < num_tasks; ++t) {
      out += "," + format_real(r.train_loss[t]) + "," + format_real(r.eval_loss[t]) + ",";
      if (!r.gamma.empty()) out += format_real(r.gamma[t]);
    }
    for (std::size_t g = 0; g < num_sigmas; ++g) {
      out += ",";
      if (g < r.sigma.size()) out += format_real(r.sigma[g]);
    }
    out += "\n";
  }
  return out;
}

TelemetryTable parse_telemetry_csv(const std::string& text) {
  TelemetryTable table;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# galw seed=", 0) != 0) {
    throw ContractError("telemetry: missing provenance line");
  }
  {
    std::istringstream pl(line.substr(2));
    std::string word;
    while (pl >> word) {
      if (word.rfind("seed=", 0) == 0) table.prov.seed = std::stoull(word.substr(5));
      if (word.rfind("config_sha256=", 0) == 0) table.prov.config_sha256 = word.substr(14);
    }
  }
  if (!std::getline(in, line)) throw ContractError("telemetry: missing header");
  table.columns = split(line, ',');
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != table.columns.size()) {
      throw ContractError("telemetry: row has " + std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(table.columns.size()));
    }
    std::vector<std::optional<double>> row;
    for (const auto& c : cells) {
      if (c.empty()) {
        row.emplace_back();
      } else {
        row.emplace_back(std::strtod(c.c_str(), nullptr));
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

json grouping_json(const grouping::Grouping& g, const Provenance& prov) {
  json j;
  j["num_groups"] = g.num_groups;
  j["linkage"] = grouping::to_string(g.linkage);
  j["strategy"] = g.strategy;
  j["groups"] = g.groups();
  json slopes = json::array();
  for (const auto& s : g.slopes) slopes.push_back({{"task_id", s.task_id}, {"s", s.s}, {"s_star", s.s_star}});
  j["slopes"] = std::move(slopes);
  j.update(provenance_fields(prov));
  return j;
}

json traces_json(std::span<const grouping::GradTrace> traces, const Provenance& prov) {
  json j = provenance_fields(prov);
  j["epochs"] = traces.empty() ? 0 : traces.front().gammas.size();
  json list = json::array();
  for (const auto& t : traces) list.push_back({{"task_id", t.task_id}, {"gammas", t.gammas}});
  j["traces"] = std::move(list);
  return j;
}

TraceFile parse_traces(const json& doc) {
  if (!doc.is_object()) throw ContractError("traces: expected a JSON object");
  TraceFile f;
  f.prov = read_provenance(doc);
  if (!doc.contains("traces") || !doc["traces"].is_array()) {
    throw ContractError("traces: missing 'traces' array");
  }
  const auto& list = doc["traces"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& e = list[i];
    const std::string where = "traces[" + std::to_string(i) + "]";
    if (!e.is_object() || !e.contains("task_id") || !e["task_id"].is_number_integer()) {
      throw ContractError(where + ": missing integer 'task_id'");
    }
    if (!e.contains("gammas") || !e["gammas"].is_array()) {
      throw ContractError(where + ": missing 'gammas' array");
    }
    grouping::GradTrace t;
    t.task_id = e["task_id"].get<int>();
    for (const auto& v : e["gammas"]) {
      if (!v.is_number()) throw ContractError(where + ": gammas must be numbers");
      t.gammas.push_back(v.get<double>());
    }
    if (!f.traces.empty() && t.gammas.size() != f.traces.front().gammas.size()) {
      throw ContractError(where + ": trace length differs from traces[0]");
    }
    f.traces.push_back(std::move(t));
  }
  if (doc.contains("epochs") && !f.traces.empty() &&
      doc["epochs"] != json(f.traces.front().gammas.size())) {
    throw ContractError("traces: 'epochs' disagrees with the trace length");
  }
  return f;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace galw::io
