#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dado/dado.hpp"

namespace fs = std::filesystem;
using namespace dado;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsage = 2;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  for (const auto& cell : split_list(text)) out.push_back(std::stod(cell));
  return out;
}

struct LoadedPool {
  CandidatePool pool;
  std::string path;
  std::string checksum;
};

LoadedPool load_pool_file(const std::string& path, std::size_t dim, std::size_t num_obj) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingFile, "pool file '" + path + "' does not exist");
  if (dim == 0 || num_obj == 0) {
    const auto shape = pool_shape_from_header(path);
    if (dim == 0) dim = shape.dim;
    if (num_obj == 0) num_obj = shape.num_obj;
  }
  return {load_pool(path, dim, num_obj), path, checksum_hex(read_text_file(path))};
}

nlohmann::ordered_json manifest(const ScenarioConfig& cfg, const LoadedPool& pool, const std::string& started,
                                const std::vector<std::string>& outputs) {
  return {{"tool", "dado"},
          {"version", kVersion},
          {"config", scenario_json(cfg)},
          {"pool", {{"path", pool.path}, {"checksum", pool.checksum}, {"size", pool.pool.size()},
                    {"dim", pool.pool.dim()}, {"num_obj", pool.pool.num_obj()}}},
          {"started_utc", started},
          {"finished_utc", utc_timestamp()},
          {"outputs", outputs}};
}

void write_run(const fs::path& dir, const ExperimentResult& result, const LoadedPool& pool, const std::string& started) {
  fs::create_directories(dir);
  write_text_file((dir / "iterations.csv").string(), iterations_csv(result.curve));
  write_text_file((dir / "summary.json").string(), summary_json(result).dump(2) + "\n");
  write_text_file((dir / "manifest.json").string(),
                  manifest(result.scenario, pool, started, {"iterations.csv", "summary.json"}).dump(2) + "\n");
}

std::size_t thread_count() {
  if (const char* env = std::getenv("DADO_THREADS")) {
    try {
      const auto n = std::stoul(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct GenPoolArgs {
  std::string kind = "analytic";
  std::size_t n = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string mean = "0,0";
  std::string cov = "1,0,0,1";
  std::string anchor_a;
  std::string anchor_b;
};

int cmd_gen_pool(const GenPoolArgs& a) {
  SyntheticPoolSpec spec;
  try {
    if (a.n == 0) throw Error(ErrorKind::InvalidConfig, "--n must be positive");
    if (a.d == 0) throw Error(ErrorKind::InvalidConfig, "--d must be positive");
    spec.n = a.n;
    spec.d = a.d;
    spec.seed = a.seed;
    if (a.kind == "gaussian") {
      spec.kind = SyntheticKind::GaussianObjectives;
      spec.mean = parse_reals(a.mean);
      const auto flat = parse_reals(a.cov);
      const std::size_t m = spec.mean.size();
      if (flat.size() != m * m) throw Error(ErrorKind::InvalidCovariance, "--cov needs " + std::to_string(m * m) + " entries");
      spec.covariance.assign(m, std::vector<double>(m));
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < m; ++c) spec.covariance[r][c] = flat[r * m + c];
      cholesky(spec.covariance);
    } else if (a.kind == "analytic") {
      spec.kind = SyntheticKind::AnalyticBiobjective;
      if (!a.anchor_a.empty()) spec.anchor_a = parse_reals(a.anchor_a);
      if (!a.anchor_b.empty()) spec.anchor_b = parse_reals(a.anchor_b);
    } else {
      throw Error(ErrorKind::InvalidConfig, "--kind must be gaussian or analytic");
    }
  } catch (const std::exception& e) {
    std::cerr << "gen-pool: " << e.what() << "\n";
    return kUsage;
  }
  try {
    const auto pool = gen_synthetic_pool(spec);
    const auto csv = pool_to_csv(pool);
    write_text_file(a.out, csv);
    std::cout << "n=" << pool.size() << " d=" << pool.dim() << " num_obj=" << pool.num_obj() << " checksum=" << checksum_hex(csv)
              << "\n";
  } catch (const Error& e) {
    std::cerr << "gen-pool: " << e.what() << "\n";
    return e.kind() == ErrorKind::InvalidConfig || e.kind() == ErrorKind::InvalidCovariance ? kUsage : kRuntimeFailure;
  }
  return kOk;
}

struct RunArgs {
  std::string pool;
  std::string config;
  std::size_t dim = 0;
  std::size_t num_obj = 0;
  std::string strategy;
  std::optional<std::size_t> initial, draw, aq, budget;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

int cmd_run(const RunArgs& a) {
  ScenarioConfig cfg;
  try {
    if (!a.config.empty()) cfg = parse_scenario(read_text_file(a.config));
    if (!a.strategy.empty()) cfg.strategy = parse_strategy(a.strategy);
    if (a.initial) cfg.initial_size = *a.initial;
    if (a.draw) cfg.draw_size = *a.draw;
    if (a.aq) cfg.aq_size = *a.aq;
    if (a.budget) cfg.budget = *a.budget;
    if (a.seed) cfg.seed = *a.seed;
    cfg.validate();
  } catch (const Error& e) {
    std::cerr << "run: " << e.what() << "\n";
    return e.kind() == ErrorKind::MissingFile ? kRuntimeFailure : kUsage;
  }
  try {
    const std::string started = utc_timestamp();
    auto loaded = load_pool_file(a.pool, a.dim, a.num_obj);
    CandidatePool pool = loaded.pool;
    const auto result = run_experiment(pool, ExpertOracle::pool_backed(), cfg);
    write_run(a.out_dir, result, loaded, started);
    std::cout << "run: " << result.curve.size() << " iterations, final intersections="
              << result.summary[metric_index("intersections")].final_value
              << " srocc=" << result.summary[metric_index("srocc")].final_value << "\n";
  } catch (const std::exception& e) {
    std::cerr << "run: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}

struct SweepArgs {
  std::string config;
  std::string pool;
  std::string out_dir;
};

std::string run_dir_name(const ScenarioConfig& c) {
  return c.name + "_aq" + std::to_string(c.aq_size) + "_" + std::string(to_string(c.strategy)) + "_seed" + std::to_string(c.seed);
}

int cmd_sweep(const SweepArgs& a) {
  SweepFile sweep;
  try {
    sweep = parse_sweep(read_text_file(a.config));
  } catch (const Error& e) {
    std::cerr << "sweep: " << e.what() << "\n";
    return e.kind() == ErrorKind::MissingFile ? kRuntimeFailure : kUsage;
  }
  try {
    std::string pool_path = a.pool;
    if (pool_path.empty()) {
      auto it = sweep.globals.find("pool");
      if (it == sweep.globals.end()) {
        std::cerr << "sweep: no pool given (--pool or `pool =` in the sweep file)\n";
        return kUsage;
      }
      pool_path = it->second;
    }
    std::size_t dim = 0, num_obj = 0;
    if (auto it = sweep.globals.find("dim"); it != sweep.globals.end()) dim = std::stoul(it->second);
    if (auto it = sweep.globals.find("num_obj"); it != sweep.globals.end()) num_obj = std::stoul(it->second);
    const auto loaded = load_pool_file(pool_path, dim, num_obj);
    const std::string started = utc_timestamp();
    const fs::path out(a.out_dir);
    fs::create_directories(out);

    // per-run artifacts are written as runs finish; the aggregate afterwards
    const auto summary = run_sweep(loaded.pool, ExpertOracle::pool_backed(), sweep.scenarios, sweep.strategies, sweep.seeds,
                                   thread_count(), [&](const RunOutcome& run) {
                                     const auto dir = out / run_dir_name(run.scenario);
                                     if (run.result) {
                                       write_run(dir, *run.result, loaded, started);
                                       std::cout << "done " << dir.filename().string() << "\n";
                                     } else {
                                       fs::create_directories(dir);
                                       write_text_file((dir / "error.txt").string(), run.error + "\n");
                                       std::cerr << "failed " << dir.filename().string() << ": " << run.error << "\n";
                                     }
                                   });
    write_text_file((out / "table.csv").string(), table_csv(summary.table));
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& run : summary.runs)
      runs.push_back({{"dir", run_dir_name(run.scenario)}, {"ok", run.result.has_value()}, {"error", run.error}});
    nlohmann::ordered_json m = {{"tool", "dado"},
                                {"version", kVersion},
                                {"sweep_config", a.config},
                                {"pool", {{"path", loaded.path}, {"checksum", loaded.checksum}}},
                                {"started_utc", started},
                                {"finished_utc", utc_timestamp()},
                                {"runs", runs},
                                {"outputs", {"table.csv"}}};
    write_text_file((out / "manifest.json").string(), m.dump(2) + "\n");
    std::cout << "sweep: " << summary.runs.size() - summary.failures() << "/" << summary.runs.size() << " runs succeeded, "
              << summary.table.size() / kMetricNames.size() << " aggregate groups\n";
    return summary.failures() == summary.runs.size() ? kRuntimeFailure : kOk;
  } catch (const std::exception& e) {
    std::cerr << "sweep: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::string metric;
  std::string out;
};

/// A run directory holds iterations.csv + manifest.json; a sweep directory holds run directories.
void collect_run_dirs(const fs::path& p, std::vector<fs::path>& out) {
  if (fs::exists(p / "iterations.csv")) {
    out.push_back(p);
    return;
  }
  if (!fs::is_directory(p)) throw Error(ErrorKind::MissingFile, "'" + p.string() + "' is not a run directory");
  std::vector<fs::path> children;
  for (const auto& entry : fs::directory_iterator(p))
    if (entry.is_directory() && fs::exists(entry.path() / "iterations.csv")) children.push_back(entry.path());
  if (children.empty()) throw Error(ErrorKind::MissingFile, "no runs found under '" + p.string() + "'");
  std::sort(children.begin(), children.end());
  out.insert(out.end(), children.begin(), children.end());
}

int cmd_report(const ReportArgs& a) {
  std::size_t metric = 0;
  try {
    metric = metric_index(a.metric);
  } catch (const Error& e) {
    std::cerr << "report: " << e.what() << "\n";
    return kUsage;
  }
  try {
    std::vector<fs::path> dirs;
    for (const auto& r : a.runs) collect_run_dirs(r, dirs);
    // strategy -> per-run series, strategies in first-seen order
    std::vector<std::string> strategy_order;
    std::map<std::string, std::vector<std::vector<double>>> series;
    std::optional<std::size_t> n_iter;
    for (const auto& dir : dirs) {
      const auto m = nlohmann::json::parse(read_text_file((dir / "manifest.json").string()));
      const std::string strategy = m.at("config").at("strategy").get<std::string>();
      const auto curve = parse_iterations_csv(read_text_file((dir / "iterations.csv").string()), (dir / "iterations.csv").string());
      if (n_iter && *n_iter != curve.size())
        throw Error(ErrorKind::SizeMismatch, "run '" + dir.string() + "' has " + std::to_string(curve.size()) +
                                                 " iterations, expected " + std::to_string(*n_iter));
      n_iter = curve.size();
      std::vector<double> s;
      for (const auto& r : curve) s.push_back(metric_value(r, metric));
      if (!series.count(strategy)) strategy_order.push_back(strategy);
      series[strategy].push_back(std::move(s));
    }
    std::string csv = "iteration,strategy,metric,mean,stderr\n";
    for (const auto& strategy : strategy_order) {
      const auto& runs = series[strategy];
      for (std::size_t i = 0; i < *n_iter; ++i) {
        std::vector<double> at;
        for (const auto& s : runs) at.push_back(s[i]);
        const auto ms = mean_stderr(at);
        csv += std::to_string(i) + ',' + strategy + ',' + a.metric + ',' + format_real(ms.mean) + ',' + format_real(ms.stderr_) + '\n';
      }
    }
    write_text_file(a.out, csv);
    std::cout << "report: " << dirs.size() << " runs, " << strategy_order.size() << " strategies, " << *n_iter << " iterations\n";
  } catch (const std::exception& e) {
    std::cerr << "report: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pool-based deep active design optimization laboratory"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenPoolArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-pool", "Write a synthetic pool CSV");
  gen_cmd->add_option("--kind", gen.kind, "gaussian | analytic")->check(CLI::IsMember({"gaussian", "analytic"}));
  gen_cmd->add_option("--n", gen.n, "number of candidates")->required();
  gen_cmd->add_option("--d", gen.d, "number of design parameters")->required();
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "output CSV path")->required();
  gen_cmd->add_option("--mean", gen.mean, "gaussian: comma-separated objective mean");
  gen_cmd->add_option("--cov", gen.cov, "gaussian: row-major covariance entries");
  gen_cmd->add_option("--anchor-a", gen.anchor_a, "analytic: comma-separated anchor a (default 0.25 each)");
  gen_cmd->add_option("--anchor-b", gen.anchor_b, "analytic: comma-separated anchor b (default 0.75 each)");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one active design experiment");
  run_cmd->add_option("--pool", run.pool, "pool CSV")->required();
  run_cmd->add_option("--config", run.config, "scenario config file (key = value)");
  run_cmd->add_option("--dim", run.dim, "parameter columns (default: from header)");
  run_cmd->add_option("--num-obj", run.num_obj, "objective columns (default: from header)");
  run_cmd->add_option("--strategy", run.strategy, "random | l2-select | l2-reject");
  run_cmd->add_option("--initial", run.initial, "initial_size");
  run_cmd->add_option("--draw", run.draw, "draw_size");
  run_cmd->add_option("--aq", run.aq, "aq_size");
  run_cmd->add_option("--budget", run.budget, "budget");
  run_cmd->add_option("--seed", run.seed, "master seed");
  run_cmd->add_option("--out-dir", run.out_dir, "output directory")->required();

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a scenario x strategy x seed grid");
  sweep_cmd->add_option("--config", sweep.config, "sweep file")->required();
  sweep_cmd->add_option("--pool", sweep.pool, "pool CSV (overrides `pool =` in the sweep file)");
  sweep_cmd->add_option("--out-dir", sweep.out_dir, "output directory")->required();

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Emit plot-ready learning curves");
  report_cmd->add_option("--runs", report.runs, "run or sweep directories")->required();
  report_cmd->add_option("--metric", report.metric, "intersections | mr_raw | mr_norm | srocc | best_mse | rnd_mse")->required();
  report_cmd->add_option("--out", report.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*gen_cmd) return cmd_gen_pool(gen);
  if (*run_cmd) return cmd_run(run);
  if (*sweep_cmd) return cmd_sweep(sweep);
  if (*report_cmd) return cmd_report(report);
  return kUsage;
}
