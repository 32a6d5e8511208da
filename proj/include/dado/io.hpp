#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "loop.hpp"
#include "oracle.hpp"
#include "random.hpp"
#include "surrogate.hpp"

namespace dado {

inline constexpr const char* kIterationsHeader = "iter,train_size,intersections,mr_raw,mr_norm,srocc,best_mse,rnd_mse";

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// FNV-1a 64 of the bytes, as 16 hex digits.
inline std::string checksum_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

struct PoolShape {
  std::size_t dim = 0;
  std::size_t num_obj = 0;
};

/// Reads `p*` and `j*` column counts from a pool CSV header.
inline PoolShape pool_shape_from_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open pool file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::SchemaMismatch, "'" + path + "' is empty");
  PoolShape shape;
  for (const auto& cell : detail::split_csv_line(detail::trim(line))) {
    const auto name = detail::trim(cell);
    if (!name.empty() && name.front() == 'p' && shape.num_obj == 0) ++shape.dim;
    else if (!name.empty() && name.front() == 'j') ++shape.num_obj;
    else throw Error(ErrorKind::SchemaMismatch, "unexpected pool column '" + name + "' in '" + path + "'");
  }
  if (shape.dim == 0 || shape.num_obj == 0) throw Error(ErrorKind::SchemaMismatch, "'" + path + "' needs p* and j* columns");
  return shape;
}

inline std::string iterations_csv(std::span<const IterationRecord> curve) {
  std::string out = std::string(kIterationsHeader) + "\n";
  for (const auto& r : curve) {
    out += std::to_string(r.iteration) + ',' + std::to_string(r.train_size) + ',' + format_real(r.intersections) + ',' +
           format_real(r.mr_raw) + ',' + format_real(r.mr_norm) + ',' + format_real(r.srocc) + ',' + format_real(r.best_mse) +
           ',' + format_real(r.rnd_mse) + '\n';
  }
  return out;
}

inline std::vector<IterationRecord> parse_iterations_csv(const std::string& text, const std::string& origin = "iterations.csv") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kIterationsHeader)
    throw Error(ErrorKind::SchemaMismatch, origin + ": unexpected header");
  std::vector<IterationRecord> out;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(detail::trim(line));
    if (cells.size() != 8) throw Error(ErrorKind::SchemaMismatch, origin + ": row " + std::to_string(out.size()) + " has wrong width");
    IterationRecord r;
    r.iteration = std::stoul(cells[0]);
    r.train_size = std::stoul(cells[1]);
    r.intersections = std::stod(cells[2]);
    r.mr_raw = std::stod(cells[3]);
    r.mr_norm = std::stod(cells[4]);
    r.srocc = std::stod(cells[5]);
    r.best_mse = std::stod(cells[6]);
    r.rnd_mse = std::stod(cells[7]);
    out.push_back(r);
  }
  return out;
}

inline nlohmann::ordered_json summary_json(const ExperimentResult& result) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t m = 0; m < kMetricNames.size(); ++m)
    j[kMetricNames[m]] = {{"auc", result.summary[m].auc}, {"final", result.summary[m].final_value}};
  return j;
}

inline std::string table_csv(std::span<const AggregateRow> rows) {
  std::string out = "scenario,aq_size,strategy,metric,auc_mean,auc_stderr,final_mean,final_stderr\n";
  for (const auto& r : rows)
    out += r.scenario + ',' + std::to_string(r.aq_size) + ',' + std::string(to_string(r.strategy)) + ',' + r.metric + ',' +
           format_real(r.auc_mean) + ',' + format_real(r.auc_stderr) + ',' + format_real(r.final_mean) + ',' +
           format_real(r.final_stderr) + '\n';
  return out;
}

inline std::string to_string(TargetSpace space) { return space == TargetSpace::Raw ? "raw" : "normalized"; }

inline nlohmann::ordered_json scenario_json(const ScenarioConfig& c) {
  return {{"name", c.name},
          {"initial_size", c.initial_size},
          {"draw_size", c.draw_size},
          {"aq_size", c.aq_size},
          {"budget", c.budget},
          {"n_iter", c.n_iter()},
          {"strategy", to_string(c.strategy)},
          {"seed", c.seed},
          {"target_space", to_string(c.selection_space)},
          {"hidden", c.surrogate.hidden},
          {"negative_slope", c.surrogate.negative_slope},
          {"dropout_rate", c.surrogate.dropout_rate},
          {"learning_rate", c.training.learning_rate},
          {"batch_size", c.training.batch_size},
          {"patience", c.training.patience},
          {"max_epochs", c.training.max_epochs}};
}

// ---------------------------------------------------------------------------
// Flat key = value configuration. '#' starts a comment; `[name]` opens a
// scenario section (sweep files only).

struct ConfigSection {
  std::string name;
  std::map<std::string, std::string> values;
};

struct ConfigFile {
  ConfigSection global;
  std::vector<ConfigSection> sections;
};

inline ConfigFile parse_config(const std::string& text) {
  ConfigFile cfg;
  ConfigSection* current = &cfg.global;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(lineno) + ": unterminated section");
      cfg.sections.push_back({detail::trim(line.substr(1, line.size() - 2)), {}});
      current = &cfg.sections.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(lineno) + ": expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(lineno) + ": empty key");
    current->values[key] = detail::trim(line.substr(eq + 1));
  }
  return cfg;
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  for (auto& cell : detail::split_csv_line(value)) {
    auto t = detail::trim(cell);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

namespace detail {

inline std::uint64_t parse_natural(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!value.empty() && value.front() == '-') throw std::invalid_argument("negative");
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size())
    throw Error(ErrorKind::InvalidConfig, "'" + key + "' expects a non-negative integer, got '" + value + "'");
  return v;
}

inline double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw Error(ErrorKind::InvalidConfig, "'" + key + "' expects a number, got '" + value + "'");
  return v;
}

}  // namespace detail

/// Applies recognised scenario keys onto `cfg`; list-valued keys are rejected here.
inline void apply_scenario_keys(ScenarioConfig& cfg, const std::map<std::string, std::string>& values,
                                const std::vector<std::string>& ignore = {}) {
  for (const auto& [key, value] : values) {
    if (std::find(ignore.begin(), ignore.end(), key) != ignore.end()) continue;
    if (key == "name") cfg.name = value;
    else if (key == "initial_size") cfg.initial_size = detail::parse_natural(key, value);
    else if (key == "draw_size") cfg.draw_size = detail::parse_natural(key, value);
    else if (key == "aq_size") cfg.aq_size = detail::parse_natural(key, value);
    else if (key == "budget") cfg.budget = detail::parse_natural(key, value);
    else if (key == "strategy") cfg.strategy = parse_strategy(value);
    else if (key == "seed") cfg.seed = detail::parse_natural(key, value);
    else if (key == "target_space") {
      if (value == "raw") cfg.selection_space = TargetSpace::Raw;
      else if (value == "normalized") cfg.selection_space = TargetSpace::Normalized;
      else throw Error(ErrorKind::InvalidConfig, "target_space must be raw or normalized");
    } else if (key == "hidden") {
      cfg.surrogate.hidden.clear();
      for (const auto& h : split_list(value)) cfg.surrogate.hidden.push_back(detail::parse_natural(key, h));
    } else if (key == "negative_slope") cfg.surrogate.negative_slope = detail::parse_real(key, value);
    else if (key == "dropout_rate") cfg.surrogate.dropout_rate = detail::parse_real(key, value);
    else if (key == "learning_rate") cfg.training.learning_rate = detail::parse_real(key, value);
    else if (key == "batch_size") cfg.training.batch_size = detail::parse_natural(key, value);
    else if (key == "patience") cfg.training.patience = detail::parse_natural(key, value);
    else if (key == "max_epochs") cfg.training.max_epochs = detail::parse_natural(key, value);
    else throw Error(ErrorKind::InvalidConfig, "unknown key '" + key + "'");
  }
}

inline ScenarioConfig parse_scenario(const std::string& text) {
  const auto file = parse_config(text);
  if (!file.sections.empty()) throw Error(ErrorKind::InvalidConfig, "a run config has no sections");
  ScenarioConfig cfg;
  apply_scenario_keys(cfg, file.global.values, {"pool", "dim", "num_obj"});
  cfg.validate();
  return cfg;
}

/// Sweep file: global `strategies`, `seeds` (and optional pool keys), then one
/// `[name]` section per scenario. `aq_size` inside a section may be a list,
/// expanding into one scenario per value.
struct SweepFile {
  std::vector<ScenarioConfig> scenarios;
  std::vector<StrategyKind> strategies;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> globals;
};

inline SweepFile parse_sweep(const std::string& text) {
  const auto file = parse_config(text);
  SweepFile sweep;
  sweep.globals = file.global.values;
  const auto& g = file.global.values;
  auto list_or = [&](const char* key, const char* fallback) {
    auto it = g.find(key);
    return split_list(it == g.end() ? fallback : it->second);
  };
  for (const auto& s : list_or("strategies", "random,l2-select,l2-reject")) sweep.strategies.push_back(parse_strategy(s));
  for (const auto& s : list_or("seeds", "0,1,2,3,4")) sweep.seeds.push_back(detail::parse_natural("seeds", s));

  // global scenario keys act as defaults for every section
  ScenarioConfig base;
  std::map<std::string, std::string> global_scenario_keys;
  for (const auto& [k, v] : g)
    if (k != "strategies" && k != "seeds" && k != "pool" && k != "dim" && k != "num_obj" && k != "threads")
      global_scenario_keys[k] = v;
  apply_scenario_keys(base, global_scenario_keys, {"aq_size"});

  auto expand = [&](const std::string& name, std::map<std::string, std::string> values) {
    std::vector<std::string> aq_values;
    if (auto it = values.find("aq_size"); it != values.end()) aq_values = split_list(it->second);
    else if (auto jt = global_scenario_keys.find("aq_size"); jt != global_scenario_keys.end()) aq_values = split_list(jt->second);
    else aq_values = {std::to_string(base.aq_size)};
    values.erase("aq_size");
    for (const auto& aq : aq_values) {
      ScenarioConfig sc = base;
      sc.name = name;
      apply_scenario_keys(sc, values);
      sc.aq_size = detail::parse_natural("aq_size", aq);
      sc.validate();
      sweep.scenarios.push_back(sc);
    }
  };
  if (file.sections.empty()) expand(base.name, {});
  for (const auto& section : file.sections) expand(section.name, section.values);
  if (sweep.strategies.empty() || sweep.seeds.empty()) throw Error(ErrorKind::InvalidConfig, "sweep needs strategies and seeds");
  return sweep;
}

// ---------------------------------------------------------------------------
// Debug weight snapshot: JSON array of layers, row-major data with shapes.

inline nlohmann::json snapshot_json(const Mlp& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    layers.push_back({{"weight", {{"shape", {l.weight.rows(), l.weight.cols()}}, {"data", w}}},
                      {"bias", {{"shape", {l.bias.size()}}, {"data", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}}}});
  }
  return {{"negative_slope", model.config().negative_slope}, {"dropout_rate", model.config().dropout_rate}, {"layers", layers}};
}

inline Mlp snapshot_from_json(const nlohmann::json& j) {
  const auto& layers = j.at("layers");
  if (layers.empty()) throw Error(ErrorKind::SchemaMismatch, "snapshot has no layers");
  MlpConfig cfg;
  cfg.negative_slope = j.at("negative_slope").get<double>();
  cfg.dropout_rate = j.at("dropout_rate").get<double>();
  cfg.input_dim = layers.front().at("weight").at("shape").at(1).get<std::size_t>();
  cfg.output_dim = layers.back().at("weight").at("shape").at(0).get<std::size_t>();
  cfg.hidden.clear();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) cfg.hidden.push_back(layers[i].at("weight").at("shape").at(0).get<std::size_t>());
  Mlp model(cfg, 0);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = model.layers()[i];
    const auto w = layers[i].at("weight").at("data").get<std::vector<double>>();
    const auto b = layers[i].at("bias").at("data").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(l.weight.size()) || b.size() != static_cast<std::size_t>(l.bias.size()))
      throw Error(ErrorKind::SchemaMismatch, "snapshot layer " + std::to_string(i) + " has inconsistent data length");
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * l.weight.cols() + c)];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = b[static_cast<std::size_t>(r)];
  }
  return model;
}

}  // namespace dado
