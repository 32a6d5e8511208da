#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "datapool.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "oracle.hpp"
#include "random.hpp"
#include "strategies.hpp"
#include "surrogate.hpp"

namespace dado {

struct ScenarioConfig {
  std::string name = "S1";
  std::size_t initial_size = 100;
  std::size_t draw_size = 400;
  std::size_t aq_size = 25;
  std::size_t budget = 500;
  StrategyKind strategy = StrategyKind::L2Select;
  std::uint64_t seed = 0;
  MlpConfig surrogate;
  TrainConfig training;
  /// Space in which strategies and rank metrics see the objectives.
  TargetSpace selection_space = TargetSpace::Normalized;

  static ScenarioConfig low_budget(std::size_t aq_size = 25) {
    ScenarioConfig c;
    c.name = "S1";
    c.aq_size = aq_size;
    return c;
  }

  static ScenarioConfig high_budget(std::size_t aq_size = 50) {
    ScenarioConfig c;
    c.name = "S2";
    c.initial_size = 500;
    c.draw_size = 2000;
    c.aq_size = aq_size;
    c.budget = 1500;
    return c;
  }

  std::size_t n_iter() const { return (budget - initial_size) / aq_size; }

  void validate() const {
    if (initial_size == 0) throw Error(ErrorKind::InvalidConfig, "initial_size must be positive");
    if (aq_size == 0) throw Error(ErrorKind::InvalidConfig, "aq_size must be positive");
    if (aq_size > draw_size) throw Error(ErrorKind::InvalidConfig, "aq_size must not exceed draw_size");
    if (budget <= initial_size) throw Error(ErrorKind::InvalidConfig, "budget must exceed initial_size");
    if ((budget - initial_size) % aq_size != 0)
      throw Error(ErrorKind::InvalidConfig, "budget - initial_size must be a multiple of aq_size");
    surrogate.validate();
    training.validate();
  }
};

/// Everything the surrogate may see when fitting: acquired designs and their
/// annotations, already normalized.
struct AnnotatedSet {
  std::span<const DesignCandidate> candidates;
  const TrainingData& data;
  const Normalizers& normalizers;
  std::size_t iteration;
};

/// Prediction backend of the loop. Implementations return objectives in
/// normalized target space.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual void fit(const AnnotatedSet& train) = 0;
  virtual std::vector<ObjectiveVector> predict(std::span<const DesignCandidate> draw, const Normalizers& norms) const = 0;
};

/// The MLP surrogate, reinitialized and retrained from scratch on every fit.
class MlpPredictor final : public Predictor {
 public:
  MlpPredictor(MlpConfig model, TrainConfig training, std::uint64_t master_seed)
      : model_cfg_(std::move(model)), train_cfg_(training), master_seed_(master_seed) {}

  void fit(const AnnotatedSet& train) override {
    Rng shuffle_rng(derive_seed(master_seed_, "train-shuffle", train.iteration));
    Rng dropout_rng(derive_seed(master_seed_, "dropout", train.iteration));
    auto result = dado::train(init_model(model_cfg_, derive_seed(master_seed_, "model-init", train.iteration)), train.data,
                              train_cfg_, shuffle_rng, dropout_rng);
    model_ = std::move(result.model);
    logs_.push_back(std::move(result.log));
  }

  std::vector<ObjectiveVector> predict(std::span<const DesignCandidate> draw, const Normalizers& norms) const override {
    if (!model_) throw Error(ErrorKind::InvalidConfig, "predict called before fit");
    return predict_batch(*model_, draw, norms.features, norms.targets, TargetSpace::Normalized);
  }

  const std::vector<TrainLog>& train_logs() const { return logs_; }

 private:
  MlpConfig model_cfg_;
  TrainConfig train_cfg_;
  std::uint64_t master_seed_;
  std::optional<Mlp> model_;
  std::vector<TrainLog> logs_;
};

/// Diagnostic stand-in that predicts the ground truth exactly. Only useful
/// for checking the metric pipeline; it reads annotations a real surrogate
/// never gets.
class OraclePredictor final : public Predictor {
 public:
  explicit OraclePredictor(ExpertOracle oracle) : oracle_(std::move(oracle)) {}

  void fit(const AnnotatedSet&) override {}

  std::vector<ObjectiveVector> predict(std::span<const DesignCandidate> draw, const Normalizers& norms) const override {
    auto ys = oracle_.annotate(draw);
    for (auto& y : ys) y = norms.targets.apply(y);
    return ys;
  }

 private:
  ExpertOracle oracle_;
};

inline constexpr std::array<const char*, 6> kMetricNames{"intersections", "mr_raw", "mr_norm", "srocc", "best_mse", "rnd_mse"};

inline double metric_value(const IterationRecord& r, std::size_t metric) {
  switch (metric) {
    case 0: return r.intersections;
    case 1: return r.mr_raw;
    case 2: return r.mr_norm;
    case 3: return r.srocc;
    case 4: return r.best_mse;
    case 5: return r.rnd_mse;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown metric index");
}

inline std::size_t metric_index(std::string_view name) {
  for (std::size_t m = 0; m < kMetricNames.size(); ++m)
    if (name == kMetricNames[m]) return m;
  throw Error(ErrorKind::InvalidConfig, "unknown metric '" + std::string(name) + "'");
}

struct MetricSummary {
  double auc = 0.0;
  double final_value = 0.0;
};

struct ExperimentResult {
  ScenarioConfig scenario;
  std::vector<IterationRecord> curve;
  std::array<MetricSummary, kMetricNames.size()> summary{};

  std::vector<double> series(std::size_t metric) const {
    std::vector<double> out;
    out.reserve(curve.size());
    for (const auto& r : curve) out.push_back(metric_value(r, metric));
    return out;
  }
};

/// AUC and final value per metric. A single-iteration curve has no area; its
/// AUC is reported as the lone value.
inline std::array<MetricSummary, kMetricNames.size()> summarize(std::span<const IterationRecord> curve) {
  std::array<MetricSummary, kMetricNames.size()> out{};
  if (curve.empty()) return out;
  for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
    std::vector<double> s;
    for (const auto& r : curve) s.push_back(metric_value(r, m));
    out[m].final_value = s.back();
    out[m].auc = s.size() >= 2 ? auc(s) : s.front();
  }
  return out;
}

/// Per-iteration view for tests and diagnostics.
struct IterationTrace {
  std::size_t iteration = 0;
  std::vector<std::size_t> train_ids;      // annotated set the surrogate was fitted on
  std::vector<std::size_t> draw_ids;
  std::vector<std::size_t> acquired_ids;
};

using IterationObserver = std::function<void(const IterationTrace&)>;

/// Rank and error metrics of one iteration. All objective vectors must be in
/// one space; indices are positions within the draw.
inline IterationRecord evaluate_iteration(StrategyKind kind, std::span<const ObjectiveVector> predicted,
                                          std::span<const ObjectiveVector> truth, std::span<const std::size_t> selected,
                                          std::span<const ObjectiveVector> predicted_mse_space,
                                          std::span<const ObjectiveVector> truth_mse_space, std::size_t aq_size) {
  IterationRecord rec;
  const auto true_order = reference_order(truth, kind);
  const auto pred_order = preference_order(kind, predicted);
  const std::span<const std::size_t> true_top(true_order.data(), aq_size);
  const std::span<const std::size_t> pred_top(pred_order.data(), aq_size);
  rec.intersections = intersections(selected, true_top, aq_size);
  rec.mr_raw = mean_rank(selected, true_order, aq_size);
  rec.srocc = aq_size >= 2 ? srocc(pred_top, true_order, aq_size) : 1.0;

  std::vector<ObjectiveVector> sel_pred, sel_truth;
  for (auto k : selected) {
    sel_pred.push_back(predicted_mse_space[k]);
    sel_truth.push_back(truth_mse_space[k]);
  }
  rec.best_mse = mse(sel_pred, sel_truth);
  rec.rnd_mse = mse(predicted_mse_space, truth_mse_space);
  return rec;
}

/// The active design loop: train, draw, predict, select, annotate, augment.
inline ExperimentResult run_experiment(CandidatePool& pool, const ExpertOracle& oracle, const ScenarioConfig& cfg,
                                       Predictor& predictor, const IterationObserver& observer = {}) {
  cfg.validate();
  const std::size_t n_iter = cfg.n_iter();
  const std::size_t needed = cfg.initial_size + (n_iter - 1) * cfg.aq_size + cfg.draw_size;
  if (pool.available() < needed)
    throw Error(ErrorKind::PoolExhausted, "scenario needs " + std::to_string(needed) + " available candidates, pool has " +
                                              std::to_string(pool.available()));

  Rng init_rng(derive_seed(cfg.seed, "initial-sample"));
  std::vector<DesignCandidate> train_set = pool.initial_sample(cfg.initial_size, init_rng);
  std::vector<ObjectiveVector> train_truth = oracle.annotate(train_set);

  ExperimentResult result;
  result.scenario = cfg;
  double mr_first = 0.0;

  for (std::size_t i = 0; i < n_iter; ++i) {
    // (1) refit normalizers and retrain from scratch
    const Normalizers norms = fit_normalizers(pool, train_truth);
    std::vector<std::vector<double>> xs;
    std::vector<ObjectiveVector> ys;
    xs.reserve(train_set.size());
    ys.reserve(train_set.size());
    for (std::size_t n = 0; n < train_set.size(); ++n) {
      xs.push_back(norms.features.apply(train_set[n].params));
      ys.push_back(norms.targets.apply(train_truth[n]));
    }
    const TrainingData data = TrainingData::from_rows(xs, ys);
    try {
      predictor.fit(AnnotatedSet{train_set, data, norms, i});
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NumericalDivergence)
        throw Error(ErrorKind::NumericalDivergence, "iteration " + std::to_string(i) + ": " + e.what());
      throw;
    }

    // (2) bootstrap a draw, (3) predict it
    Rng draw_rng(derive_seed(cfg.seed, "draw", i));
    const std::vector<DesignCandidate> draw = pool.bootstrap_draw(cfg.draw_size, draw_rng);
    const std::vector<ObjectiveVector> predicted = predictor.predict(draw, norms);

    // (5, metrics only) ground truth of the whole draw in the same space
    std::vector<ObjectiveVector> truth = oracle.annotate(draw);
    for (auto& y : truth) y = norms.targets.apply(y);

    std::vector<ObjectiveVector> predicted_sel_space = predicted, truth_sel_space = truth;
    if (cfg.selection_space == TargetSpace::Raw) {
      for (auto& y : predicted_sel_space) y = norms.targets.invert(y);
      for (auto& y : truth_sel_space) y = norms.targets.invert(y);
    }

    // (4) select
    Rng select_rng(derive_seed(cfg.seed, "random-select", i));
    const SelectionResult selection = select(cfg.strategy, predicted_sel_space, cfg.aq_size, select_rng);

    // (6) record
    IterationRecord rec = evaluate_iteration(cfg.strategy, predicted_sel_space, truth_sel_space, selection.selected_indices,
                                             predicted, truth, cfg.aq_size);
    rec.iteration = i;
    rec.train_size = train_set.size();
    if (i == 0) mr_first = rec.mr_raw;
    rec.mr_norm = normalize_mr(rec.mr_raw, optimal_mean_rank(cfg.aq_size), mr_first);
    result.curve.push_back(rec);

    // (5) annotate the acquisition, (7) consume and augment
    std::vector<std::size_t> acquired_ids;
    std::vector<DesignCandidate> acquired;
    for (auto k : selection.selected_indices) {
      acquired_ids.push_back(draw[k].id);
      acquired.push_back(draw[k]);
    }
    const auto acquired_truth = oracle.annotate(acquired);

    if (observer) {
      IterationTrace trace{i, {}, {}, acquired_ids};
      for (const auto& c : train_set) trace.train_ids.push_back(c.id);
      for (const auto& c : draw) trace.draw_ids.push_back(c.id);
      observer(trace);
    }

    pool.consume(acquired_ids);
    train_set.insert(train_set.end(), acquired.begin(), acquired.end());
    train_truth.insert(train_truth.end(), acquired_truth.begin(), acquired_truth.end());
  }

  result.summary = summarize(result.curve);
  return result;
}

/// Convenience overload using the MLP surrogate configured in `cfg`.
inline ExperimentResult run_experiment(CandidatePool& pool, const ExpertOracle& oracle, ScenarioConfig cfg,
                                       const IterationObserver& observer = {}) {
  cfg.surrogate.input_dim = pool.dim();
  cfg.surrogate.output_dim = pool.num_obj();
  MlpPredictor predictor(cfg.surrogate, cfg.training, derive_seed(cfg.seed, "surrogate"));
  return run_experiment(pool, oracle, cfg, predictor, observer);
}

struct RunOutcome {
  ScenarioConfig scenario;
  std::optional<ExperimentResult> result;
  std::string error;
};

struct AggregateRow {
  std::string scenario;
  std::size_t aq_size = 0;
  StrategyKind strategy = StrategyKind::Random;
  std::string metric;
  double auc_mean = 0.0;
  double auc_stderr = 0.0;
  double final_mean = 0.0;
  double final_stderr = 0.0;
  std::size_t runs = 0;
};

struct SweepSummary {
  std::vector<RunOutcome> runs;
  std::vector<AggregateRow> table;

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunOutcome& r) { return !r.result; }));
  }
};

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Mean and standard error (sample std / sqrt(n)); zero error for one value.
inline MeanStderr mean_stderr(std::span<const double> xs) {
  if (xs.empty()) return {};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double n = static_cast<double>(xs.size());
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

/// Groups successful runs by (scenario, aq_size, strategy) in first-seen order.
inline std::vector<AggregateRow> aggregate(std::span<const RunOutcome> runs) {
  struct Group {
    std::string scenario;
    std::size_t aq_size;
    StrategyKind strategy;
    std::vector<const ExperimentResult*> results;
  };
  std::vector<Group> groups;
  for (const auto& run : runs) {
    if (!run.result) continue;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.scenario == run.scenario.name && g.aq_size == run.scenario.aq_size && g.strategy == run.scenario.strategy;
    });
    if (it == groups.end()) {
      groups.push_back({run.scenario.name, run.scenario.aq_size, run.scenario.strategy, {}});
      it = std::prev(groups.end());
    }
    it->results.push_back(&*run.result);
  }
  std::vector<AggregateRow> rows;
  for (const auto& g : groups) {
    for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
      std::vector<double> aucs, finals;
      for (const auto* r : g.results) {
        aucs.push_back(r->summary[m].auc);
        finals.push_back(r->summary[m].final_value);
      }
      const auto a = mean_stderr(aucs);
      const auto f = mean_stderr(finals);
      rows.push_back({g.scenario, g.aq_size, g.strategy, kMetricNames[m], a.mean, a.stderr_, f.mean, f.stderr_, g.results.size()});
    }
  }
  return rows;
}

/// Runs scenario x strategy x seed, each on a fresh copy of `pool`. Failed
/// runs are recorded and do not abort the sweep. `threads` = 0 means one
/// worker per hardware thread.
inline SweepSummary run_sweep(const CandidatePool& pool, const ExpertOracle& oracle, std::span<const ScenarioConfig> scenarios,
                              std::span<const StrategyKind> strategies, std::span<const std::uint64_t> seeds,
                              std::size_t threads = 1,
                              const std::function<void(const RunOutcome&)>& on_done = {}) {
  if (scenarios.empty() || strategies.empty() || seeds.empty())
    throw Error(ErrorKind::InvalidConfig, "sweep needs at least one scenario, strategy and seed");
  SweepSummary summary;
  for (const auto& sc : scenarios)
    for (auto st : strategies)
      for (auto seed : seeds) {
        RunOutcome run;
        run.scenario = sc;
        run.scenario.strategy = st;
        run.scenario.seed = seed;
        summary.runs.push_back(std::move(run));
      }

  std::atomic<std::size_t> next{0};
  std::mutex done_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < summary.runs.size(); k = next++) {
      auto& run = summary.runs[k];
      try {
        CandidatePool copy = pool;
        run.result = run_experiment(copy, oracle, run.scenario);
      } catch (const std::exception& e) {
        run.error = e.what();
      }
      if (on_done) {
        std::lock_guard lock(done_mutex);
        on_done(run);
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, summary.runs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool_threads;
    for (std::size_t t = 0; t < threads; ++t) pool_threads.emplace_back(worker);
  }
  summary.table = aggregate(summary.runs);
  return summary;
}

}  // namespace dado
