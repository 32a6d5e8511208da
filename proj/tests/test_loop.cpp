#include <gtest/gtest.h>

#include <set>

#include "dado/io.hpp"
#include "dado/loop.hpp"

using namespace dado;

namespace {

CandidatePool analytic_pool(std::size_t n, std::size_t d, std::uint64_t seed = 1) {
  SyntheticPoolSpec spec;
  spec.n = n;
  spec.d = d;
  spec.seed = seed;
  return gen_synthetic_pool(spec);
}

ScenarioConfig tiny_scenario(StrategyKind kind) {
  ScenarioConfig c;
  c.name = "tiny";
  c.initial_size = 20;
  c.draw_size = 60;
  c.aq_size = 10;
  c.budget = 60;
  c.strategy = kind;
  c.seed = 3;
  c.surrogate.hidden = {16, 8};
  c.training.max_epochs = 15;
  return c;
}

}  // namespace

TEST(ScenarioConfig, IterationCounts) {
  EXPECT_EQ(ScenarioConfig::low_budget(25).n_iter(), 16u);
  EXPECT_EQ(ScenarioConfig::low_budget(10).n_iter(), 40u);
  EXPECT_EQ(ScenarioConfig::high_budget(50).n_iter(), 20u);
  EXPECT_EQ(ScenarioConfig::high_budget(125).n_iter(), 8u);
  auto bad = ScenarioConfig::low_budget(30);
  EXPECT_THROW(bad.validate(), Error);
  auto too_big = ScenarioConfig::low_budget(25);
  too_big.draw_size = 20;
  EXPECT_THROW(too_big.validate(), Error);
}

TEST(RunExperiment, PerfectPredictorIsExact) {
  for (auto kind : {StrategyKind::L2Select, StrategyKind::L2Reject}) {
    auto pool = analytic_pool(2000, 6);
    ScenarioConfig cfg = ScenarioConfig::low_budget(25);
    cfg.strategy = kind;
    OraclePredictor perfect(ExpertOracle::pool_backed());
    const auto r = run_experiment(pool, ExpertOracle::pool_backed(), cfg, perfect);
    ASSERT_EQ(r.curve.size(), 16u);
    for (const auto& rec : r.curve) {
      EXPECT_EQ(rec.intersections, 1.0);
      EXPECT_EQ(rec.srocc, 1.0);
      EXPECT_EQ(rec.best_mse, 0.0);
      EXPECT_EQ(rec.rnd_mse, 0.0);
      EXPECT_EQ(rec.mr_raw, optimal_mean_rank(25));
    }
  }
}

TEST(RunExperiment, BudgetAccountingAndNoDuplicates) {
  auto pool = analytic_pool(400, 4);
  const auto cfg = tiny_scenario(StrategyKind::L2Select);
  std::vector<IterationTrace> traces;
  const auto r = run_experiment(pool, ExpertOracle::pool_backed(), cfg, [&](const IterationTrace& t) { traces.push_back(t); });
  ASSERT_EQ(r.curve.size(), cfg.n_iter());
  ASSERT_EQ(traces.size(), cfg.n_iter());
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    EXPECT_EQ(traces[i].train_ids.size(), cfg.initial_size + i * cfg.aq_size);
    EXPECT_EQ(r.curve[i].train_size, cfg.initial_size + i * cfg.aq_size);
    EXPECT_EQ(std::set<std::size_t>(traces[i].train_ids.begin(), traces[i].train_ids.end()).size(), traces[i].train_ids.size());
    EXPECT_EQ(traces[i].draw_ids.size(), cfg.draw_size);
    const std::set<std::size_t> train(traces[i].train_ids.begin(), traces[i].train_ids.end());
    for (auto id : traces[i].draw_ids) EXPECT_FALSE(train.count(id));
    for (auto id : traces[i].acquired_ids) EXPECT_TRUE(seen.insert(id).second);
  }
  EXPECT_EQ(pool.consumed_count(), cfg.budget);
  EXPECT_EQ(pool.available() + pool.consumed_count(), pool.size());
}

TEST(RunExperiment, SummaryMatchesCurve) {
  auto pool = analytic_pool(400, 4);
  const auto r = run_experiment(pool, ExpertOracle::pool_backed(), tiny_scenario(StrategyKind::L2Reject));
  for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
    const auto s = r.series(m);
    EXPECT_EQ(r.summary[m].final_value, s.back());
    EXPECT_DOUBLE_EQ(r.summary[m].auc, auc(s));
  }
  EXPECT_EQ(r.curve.front().mr_norm, r.curve.front().mr_raw > optimal_mean_rank(10) ? 1.0 : 0.0);
  for (const auto& rec : r.curve) {
    EXPECT_GE(rec.mr_norm, 0.0);
    EXPECT_LE(rec.mr_norm, 1.0);
    EXPECT_GE(rec.srocc, -1.0);
    EXPECT_LE(rec.srocc, 1.0);
  }
}

TEST(RunExperiment, SameInputsSameRecords) {
  auto p1 = analytic_pool(400, 4);
  auto p2 = analytic_pool(400, 4);
  const auto cfg = tiny_scenario(StrategyKind::Random);
  const auto a = run_experiment(p1, ExpertOracle::pool_backed(), cfg);
  const auto b = run_experiment(p2, ExpertOracle::pool_backed(), cfg);
  EXPECT_EQ(iterations_csv(a.curve), iterations_csv(b.curve));
}

TEST(RunExperiment, PoolExhaustedUpFront) {
  auto pool = analytic_pool(100, 4);
  try {
    run_experiment(pool, ExpertOracle::pool_backed(), tiny_scenario(StrategyKind::L2Select));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PoolExhausted);
  }
  EXPECT_EQ(pool.consumed_count(), 0u);
}

TEST(RunExperiment, RawSelectionSpace) {
  auto pool = analytic_pool(400, 4);
  auto cfg = tiny_scenario(StrategyKind::L2Select);
  cfg.selection_space = TargetSpace::Raw;
  OraclePredictor perfect(ExpertOracle::pool_backed());
  const auto r = run_experiment(pool, ExpertOracle::pool_backed(), cfg, perfect);
  for (const auto& rec : r.curve) EXPECT_EQ(rec.intersections, 1.0);
}

/// Stand-in that only sees what the loop hands to `fit`.
class RecordingPredictor final : public Predictor {
 public:
  void fit(const AnnotatedSet& train) override {
    for (const auto& c : train.candidates) ids.insert(c.id);
    last_size = train.data.size();
  }
  std::vector<ObjectiveVector> predict(std::span<const DesignCandidate> draw, const Normalizers&) const override {
    return std::vector<ObjectiveVector>(draw.size(), ObjectiveVector{0.0, 0.0});
  }
  std::set<std::size_t> ids;
  std::size_t last_size = 0;
};

TEST(RunExperiment, SurrogateSeesOnlyAcquiredDesigns) {
  auto pool = analytic_pool(400, 4);
  const auto cfg = tiny_scenario(StrategyKind::L2Select);
  RecordingPredictor rec;
  std::set<std::size_t> drawn_not_acquired, acquired;
  run_experiment(pool, ExpertOracle::pool_backed(), cfg, rec, [&](const IterationTrace& t) {
    for (auto id : t.draw_ids) drawn_not_acquired.insert(id);
    for (auto id : t.acquired_ids) acquired.insert(id);
  });
  for (auto id : acquired) drawn_not_acquired.erase(id);
  EXPECT_EQ(rec.last_size, cfg.budget - cfg.aq_size);
  for (auto id : rec.ids) EXPECT_FALSE(drawn_not_acquired.count(id)) << id;
}

TEST(Aggregate, MeansAndStandardErrors) {
  EXPECT_EQ(mean_stderr(std::vector<double>{0.3}).stderr_, 0.0);
  const auto ms = mean_stderr(std::vector<double>{1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(ms.mean, 2.5);
  EXPECT_DOUBLE_EQ(ms.stderr_, std::sqrt(5.0 / 3.0) / 2.0);
}

TEST(RunSweep, GridShapeAndHandAverages) {
  const auto pool = analytic_pool(400, 4);
  const std::vector<ScenarioConfig> scenarios{tiny_scenario(StrategyKind::Random)};
  const std::vector<StrategyKind> strategies{StrategyKind::Random, StrategyKind::L2Select, StrategyKind::L2Reject};
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  const auto s = run_sweep(pool, ExpertOracle::pool_backed(), scenarios, strategies, seeds, 1);
  ASSERT_EQ(s.runs.size(), 15u);
  EXPECT_EQ(s.failures(), 0u);
  ASSERT_EQ(s.table.size(), 3 * kMetricNames.size());
  for (const auto& row : s.table) {
    double sum_auc = 0, sum_final = 0;
    int n = 0;
    for (const auto& run : s.runs)
      if (run.scenario.strategy == row.strategy) {
        sum_auc += run.result->summary[metric_index(row.metric)].auc;
        sum_final += run.result->summary[metric_index(row.metric)].final_value;
        ++n;
      }
    EXPECT_EQ(n, 5);
    EXPECT_NEAR(row.auc_mean, sum_auc / 5, 1e-12);
    EXPECT_NEAR(row.final_mean, sum_final / 5, 1e-12);
  }
}

TEST(RunSweep, ThreadedEqualsSequential) {
  const auto pool = analytic_pool(400, 4);
  const std::vector<ScenarioConfig> scenarios{tiny_scenario(StrategyKind::Random)};
  const std::vector<StrategyKind> strategies{StrategyKind::L2Select, StrategyKind::Random};
  const std::vector<std::uint64_t> seeds{7, 8};
  const auto a = run_sweep(pool, ExpertOracle::pool_backed(), scenarios, strategies, seeds, 1);
  const auto b = run_sweep(pool, ExpertOracle::pool_backed(), scenarios, strategies, seeds, 3);
  EXPECT_EQ(table_csv(a.table), table_csv(b.table));
}

TEST(RunSweep, FailuresAreRecorded) {
  const auto pool = analytic_pool(70, 4);
  auto ok = tiny_scenario(StrategyKind::Random);
  ok.initial_size = 10;
  ok.draw_size = 20;
  ok.budget = 30;
  auto too_big = tiny_scenario(StrategyKind::Random);
  too_big.name = "big";
  const std::vector<ScenarioConfig> scenarios{ok, too_big};
  const std::vector<StrategyKind> strategies{StrategyKind::Random};
  const std::vector<std::uint64_t> seeds{0};
  const auto s = run_sweep(pool, ExpertOracle::pool_backed(), scenarios, strategies, seeds, 1);
  EXPECT_EQ(s.failures(), 1u);
  EXPECT_NE(s.runs[1].error.find("PoolExhausted"), std::string::npos);
  EXPECT_EQ(s.table.size(), kMetricNames.size());
  EXPECT_EQ(s.table.front().auc_stderr, 0.0);
}
