// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#include "galw/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "galw/error.hpp"

namespace galw::config {

namespace {

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (const json* v = find(key)) out = convert<T>(*v, field(key));
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ConfigError(where, "expected an integer");
      }
      if (std::is_unsigned_v<T> && v.is_number_integer() && v.get<std::int64_t>() < 0) {
        throw ConfigError(where, "expected a nonnegative integer");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<T>::infinity();
      if (!v.is_number()) throw ConfigError(where, "expected a number");
      return v.get<T>();
    } else {
      // vector<U>
      using U = typename T::value_type;
      if (!v.is_array()) throw ConfigError(where, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<U>(v[i], where + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

json real(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

train::SchemeSpec parse_scheme_spec(ObjectReader& r, const std::string& mode_key) {
  train::SchemeSpec spec;
  std::string mode = "galw";
  r.get(mode_key, mode);
  try {
    spec.kind = train::parse_scheme_kind(mode);
  } catch (const ContractError& e) {
    throw ConfigError(r.field(mode_key), e.what());
  }
  r.get("weights", spec.manual_weights);
  if (spec.kind != train::SchemeKind::Manual && !spec.manual_weights.empty()) {
    throw ConfigError(r.field("weights"), "weights only apply to mode 'manual'");
  }
  return spec;
}

void parse_scheme(const json& doc, train::TrainConfig& tc) {
  ObjectReader r(doc, "scheme");
  tc.scheme = parse_scheme_spec(r, "mode");
  r.get("lambda", tc.lambda);
  r.get("num_groups", tc.num_groups);
  std::string linkage = grouping::to_string(tc.linkage);
  r.get("linkage", linkage);
  try {
    tc.linkage = grouping::parse_linkage(linkage);
  } catch (const ContractError& e) {
    throw ConfigError(r.field("linkage"), e.what());
  }
  if (const json* g = r.find("grouping")) {
    if (g->is_string()) {
      const auto s = g->get<std::string>();
      if (s == "slope") {
        tc.scheme.strategy = train::GroupingStrategy::Slope;
      } else if (s == "random") {
        tc.scheme.strategy = train::GroupingStrategy::Random;
      } else {
        throw ConfigError(r.field("grouping"), "expected 'slope', 'random' or a list of groups");
      }
    } else {
      tc.scheme.strategy = train::GroupingStrategy::Explicit;
      tc.scheme.explicit_groups =
          ObjectReader::convert<std::vector<std::vector<int>>>(*g, r.field("grouping"));
    }
    if (tc.scheme.kind != train::SchemeKind::Galw) {
      throw ConfigError(r.field("grouping"), "grouping only applies to mode 'galw'");
    }
  }
  if (const json* p1 = r.find("phase1")) {
    ObjectReader pr(*p1, "scheme.phase1");
    tc.phase1_scheme = train::SchemeSpec{};
    std::string mode = "equal";
    pr.get("mode", mode);
    try {
      tc.phase1_scheme.kind = train::parse_scheme_kind(mode);
    } catch (const ContractError& e) {
      throw ConfigError(pr.field("mode"), e.what());
    }
    if (tc.phase1_scheme.kind == train::SchemeKind::Galw) {
      throw ConfigError(pr.field("mode"), "phase 1 cannot itself be grouped");
    }
    pr.get("weights", tc.phase1_scheme.manual_weights);
    pr.finish();
  }
  r.finish();
}

void parse_train(const json& doc, train::TrainConfig& tc) {
  ObjectReader r(doc, "train");
  r.get("epochs_phase1", tc.epochs_phase1);
  r.get("epochs_phase2", tc.epochs_phase2);
  r.get("batch_size", tc.batch_size);
  r.get("base_lr", tc.base_lr);
  r.get("lr_decay_epochs", tc.lr_decay_epochs);
  if (const json* m = r.find("phase1_lr_decay_epochs"); m && !m->is_null()) {
    tc.phase1_lr_decay_epochs =
        ObjectReader::convert<std::vector<std::size_t>>(*m, r.field("phase1_lr_decay_epochs"));
  }
  r.get("lr_decay_factor", tc.lr_decay_factor);
  r.get("warmup_steps", tc.warmup_steps);
  r.get("momentum", tc.momentum);
  r.get("weight_decay", tc.weight_decay);
  r.finish();
}

tasks::TaskSpec parse_task(const json& doc, std::size_t index) {
  const std::string path = "tasks[" + std::to_string(index) + "]";
  ObjectReader r(doc, path);
  tasks::TaskSpec t;
  t.id = static_cast<int>(index);
  int id = t.id;
  r.get("id", id);
  if (id != t.id) throw ConfigError(r.field("id"), "task ids must equal their list position");
  std::string kind;
  if (!r.has("kind")) throw ConfigError(r.field("kind"), "required");
  r.get("kind", kind);
  try {
    t.kind = tasks::parse_task_kind(kind);
  } catch (const ContractError& e) {
    throw ConfigError(r.field("kind"), e.what());
  }
  t.out_dim = t.kind == tasks::TaskKind::Classification ? 3 : 1;
  r.get("out_dim", t.out_dim);
  r.get("noise_std", t.noise_std);
  r.get("margin", t.margin);
  r.get("loss_scale", t.loss_scale);
  r.finish();
  if (t.kind == tasks::TaskKind::Classification && t.noise_std != 0.0) {
    throw ConfigError(r.field("noise_std"), "noise_std only applies to regression tasks");
  }
  try {
    tasks::validate(t);
  } catch (const ContractError& e) {
    throw ConfigError(path, e.what());
  }
  return t;
}

json task_json(const tasks::TaskSpec& t) {
  json j;
  j["id"] = t.id;
  j["kind"] = tasks::to_string(t.kind);
  j["out_dim"] = t.out_dim;
  j["loss_scale"] = t.loss_scale;
  if (t.kind == tasks::TaskKind::Regression) {
    j["noise_std"] = t.noise_std;
  } else {
    j["margin"] = real(t.margin);
  }
  return j;
}

json scheme_spec_json(const train::SchemeSpec& s) {
  json j;
  j["mode"] = train::to_string(s.kind);
  if (s.kind == train::SchemeKind::Manual) j["weights"] = s.manual_weights;
  return j;
}

}  // namespace

ExperimentConfig parse_experiment(const json& doc) {
  ObjectReader r(doc, "");
  ExperimentConfig c;
  r.get("name", c.name);
  r.get("schedule", c.schedule);
  if (c.schedule == "finetune") {
    c.train = train::finetune_schedule();
  } else if (c.schedule != "desk") {
    throw ConfigError("schedule", "expected 'desk' or 'finetune'");
  }
  r.get("seed", c.train.seed);
  r.get("output_dir", c.output_dir);

  if (const json* ds = r.find("dataset")) {
    ObjectReader dr(*ds, "dataset");
    dr.get("preset", c.preset);
    if (!c.preset.empty()) {
      try {
        const auto p = tasks::preset(c.preset);
        c.n = p.n;
        c.d_in = p.d_in;
        c.tasks = p.tasks;
      } catch (const ContractError& e) {
        throw ConfigError("dataset.preset", e.what());
      }
    }
    dr.get("n", c.n);
    dr.get("d_in", c.d_in);
    dr.finish();
  }
  if (const json* ts = r.find("tasks")) {
    if (!ts->is_array()) throw ConfigError("tasks", "expected an array");
    c.tasks.clear();
    for (std::size_t i = 0; i < ts->size(); ++i) c.tasks.push_back(parse_task((*ts)[i], i));
  }
  if (c.tasks.empty()) throw ConfigError("tasks", "no tasks: give dataset.preset or a task list");
  if (c.n < 8) throw ConfigError("dataset.n", "need at least 8 rows");
  if (c.d_in == 0) throw ConfigError("dataset.d_in", "must be positive");

  if (const json* m = r.find("model")) {
    ObjectReader mr(*m, "model");
    mr.get("hidden", c.train.hidden);
    mr.finish();
  }
  if (const json* t = r.find("train")) parse_train(*t, c.train);
  if (const json* s = r.find("scheme")) parse_scheme(*s, c.train);
  r.finish();

  train::validate(c.train, c.tasks.size());
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return parse_experiment(read_json_file(path));
}

json resolve(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["schedule"] = c.schedule;
  j["seed"] = c.train.seed;
  j["output_dir"] = c.output_dir;
  j["dataset"] = {{"preset", c.preset}, {"n", c.n}, {"d_in", c.d_in}};
  j["tasks"] = json::array();
  for (const auto& t : c.tasks) j["tasks"].push_back(task_json(t));
  j["model"] = {{"hidden", c.train.hidden}};
  const auto& tc = c.train;
  j["train"] = {
      {"epochs_phase1", tc.epochs_phase1}, {"epochs_phase2", tc.epochs_phase2},
      {"batch_size", tc.batch_size},       {"base_lr", tc.base_lr},
      {"lr_decay_epochs", tc.lr_decay_epochs}, {"lr_decay_factor", tc.lr_decay_factor},
      {"warmup_steps", tc.warmup_steps},   {"momentum", tc.momentum},
      {"weight_decay", tc.weight_decay},
  };
  if (tc.phase1_lr_decay_epochs) j["train"]["phase1_lr_decay_epochs"] = *tc.phase1_lr_decay_epochs;
  json s = scheme_spec_json(tc.scheme);
  s["lambda"] = tc.lambda;
  s["num_groups"] = tc.num_groups;
  s["linkage"] = grouping::to_string(tc.linkage);
  s["phase1"] = scheme_spec_json(tc.phase1_scheme);
  if (tc.scheme.kind == train::SchemeKind::Galw) {
    switch (tc.scheme.strategy) {
      case train::GroupingStrategy::Slope: s["grouping"] = "slope"; break;
      case train::GroupingStrategy::Random: s["grouping"] = "random"; break;
      case train::GroupingStrategy::Explicit: s["grouping"] = tc.scheme.explicit_groups; break;
    }
  }
  j["scheme"] = std::move(s);
  return j;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string config_digest(const ExperimentConfig& c) {
  json j = resolve(c);
  j.erase("output_dir");
  return sha256_hex(j.dump());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

GridConfig parse_grid(const json& doc) {
  ObjectReader r(doc, "");
  GridConfig g;
  const json* base = r.find("base");
  if (!base) throw ConfigError("base", "required");
  if (!base->is_object()) throw ConfigError("base", "expected an object");
  g.base = *base;
  const json* schemes = r.find("schemes");
  if (!schemes || !schemes->is_array() || schemes->empty()) {
    throw ConfigError("schemes", "expected a nonempty array");
  }
  std::set<std::string> labels;
  for (std::size_t i = 0; i < schemes->size(); ++i) {
    const auto& entry = (*schemes)[i];
    const std::string where = "schemes[" + std::to_string(i) + "]";
    if (!entry.is_object()) throw ConfigError(where, "expected an object");
    GridScheme s;
    s.scheme = entry;
    if (entry.contains("label")) {
      s.label = ObjectReader::convert<std::string>(entry["label"], where + ".label");
      s.scheme.erase("label");
    } else {
      s.label = entry.value("mode", std::string("galw"));
    }
    if (!labels.insert(s.label).second) throw ConfigError(where + ".label", "duplicate label '" + s.label + "'");
    g.schemes.push_back(std::move(s));
  }
  r.get("num_groups", g.num_groups);
  r.get("seeds", g.seeds);
  r.get("output_dir", g.output_dir);
  r.get("jobs", g.jobs);
  r.finish();
  if (g.seeds.empty()) throw ConfigError("seeds", "at least one seed required");
  if (g.num_groups.empty()) throw ConfigError("num_groups", "at least one value required");
  if (g.jobs == 0) throw ConfigError("jobs", "must be positive");
  return g;
}

GridConfig load_grid(const std::filesystem::path& path) { return parse_grid(read_json_file(path)); }

std::vector<GridRun> expand_grid(const GridConfig& grid) {
  std::vector<GridRun> runs;
  bool has_equal = false;
  for (std::size_t i = 0; i < grid.schemes.size(); ++i) {
    const auto& entry = grid.schemes[i];
    json scheme = grid.base.value("scheme", json::object());
    for (auto it = entry.scheme.begin(); it != entry.scheme.end(); ++it) scheme[it.key()] = it.value();
    const std::string mode = scheme.value("mode", std::string("galw"));
    if (mode == "equal") has_equal = true;
    const bool grouped = mode == "galw";
    std::vector<std::size_t> gs{0};
    if (grouped) gs = entry.scheme.contains("num_groups")
                          ? std::vector<std::size_t>{scheme["num_groups"].get<std::size_t>()}
                          : grid.num_groups;
    for (auto G : gs) {
      for (auto seed : grid.seeds) {
        json doc = grid.base;
        doc["seed"] = seed;
        json s = scheme;
        if (grouped) s["num_groups"] = G;
        doc["scheme"] = s;
        GridRun run;
        run.label = entry.label;
        run.mode = mode;
        run.num_groups = G;
        run.seed = seed;
        try {
          run.config = parse_experiment(doc);
        } catch (const ConfigError& e) {
          throw ConfigError("schemes[" + std::to_string(i) + "]", e.what());
        }
        run.dir_name = entry.label + (grouped ? "-G" + std::to_string(G) : std::string()) +
                       "/seed-" + std::to_string(seed);
        runs.push_back(std::move(run));
      }
    }
  }
  if (!has_equal) {
    throw ConfigError("schemes", "an 'equal' scheme is required as the normalization baseline");
  }
  return runs;
}

}  // namespace galw::config
