#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "dado/io.hpp"

namespace fs = std::filesystem;
using namespace dado;

namespace {

const fs::path kTmp = fs::path(DADO_TEST_TMP) / "cli";

int run_cli(const std::string& args, std::string* output = nullptr) {
  fs::create_directories(kTmp);
  const auto log = kTmp / "last_output.txt";
  const std::string cmd = std::string(DADO_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) *output = read_text_file(log.string());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string tmp(const std::string& name) { return (kTmp / name).string(); }

std::string small_pool() {
  static const std::string path = [] {
    const auto p = tmp("pool_small.csv");
    run_cli("gen-pool --kind analytic --n 600 --d 4 --seed 3 --out " + p);
    return p;
  }();
  return path;
}

const std::string kFastRun = "--initial 20 --draw 60 --aq 10 --budget 60";

}  // namespace

TEST(GenPool, GaussianFigureSize) {
  std::string out;
  ASSERT_EQ(run_cli("gen-pool --kind gaussian --n 400 --d 2 --seed 7 --out " + tmp("g.csv"), &out), 0) << out;
  const auto pool = load_pool(tmp("g.csv"), 2, 2);
  EXPECT_EQ(pool.size(), 400u);
  EXPECT_NE(out.find("n=400"), std::string::npos);
  EXPECT_NE(out.find("checksum="), std::string::npos);
}

TEST(GenPool, SameFlagsSameChecksum) {
  std::string a, b;
  ASSERT_EQ(run_cli("gen-pool --kind gaussian --n 400 --d 2 --seed 7 --out " + tmp("g1.csv"), &a), 0);
  ASSERT_EQ(run_cli("gen-pool --kind gaussian --n 400 --d 2 --seed 7 --out " + tmp("g2.csv"), &b), 0);
  EXPECT_EQ(a.substr(a.find("checksum=")), b.substr(b.find("checksum=")));
  EXPECT_EQ(read_text_file(tmp("g1.csv")), read_text_file(tmp("g2.csv")));
}

TEST(GenPool, UsageErrors) {
  EXPECT_EQ(run_cli("gen-pool --kind gaussian --n 0 --d 2 --out " + tmp("x.csv")), 2);
  EXPECT_EQ(run_cli("gen-pool --kind cubic --n 5 --d 2 --out " + tmp("x.csv")), 2);
  EXPECT_EQ(run_cli("gen-pool --kind gaussian --n 5 --d 2 --cov 1,2,2,1 --out " + tmp("x.csv")), 2);
  EXPECT_EQ(run_cli("gen-pool --n 5"), 2);
  EXPECT_EQ(run_cli("gen-pool --kind analytic --n 5 --d 2 --out /nonexistent/dir/x.csv"), 1);
}

TEST(Run, WritesArtifacts) {
  const auto dir = tmp("run_a");
  std::string out;
  ASSERT_EQ(run_cli("run --pool " + small_pool() + " --strategy l2-select " + kFastRun + " --seed 1 --out-dir " + dir, &out), 0)
      << out;
  const auto curve = parse_iterations_csv(read_text_file(dir + "/iterations.csv"));
  EXPECT_EQ(curve.size(), 4u);
  const auto summary = nlohmann::json::parse(read_text_file(dir + "/summary.json"));
  EXPECT_EQ(summary.size(), kMetricNames.size());
  EXPECT_DOUBLE_EQ(summary["srocc"]["final"].get<double>(), curve.back().srocc);
  const auto manifest = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
  EXPECT_EQ(manifest["config"]["strategy"], "l2-select");
  EXPECT_EQ(manifest["config"]["n_iter"], 4);
  EXPECT_EQ(manifest["pool"]["checksum"], checksum_hex(read_text_file(small_pool())));
}

TEST(Run, ConfigFile) {
  const auto cfg = tmp("scenario.cfg");
  write_text_file(cfg, "initial_size = 20\ndraw_size = 60\naq_size = 20\nbudget = 60\nstrategy = l2-reject\nmax_epochs = 5\n");
  const auto dir = tmp("run_cfg");
  ASSERT_EQ(run_cli("run --pool " + small_pool() + " --config " + cfg + " --out-dir " + dir), 0);
  EXPECT_EQ(parse_iterations_csv(read_text_file(dir + "/iterations.csv")).size(), 2u);
}

TEST(Run, MissingPoolNamesThePath) {
  std::string out;
  EXPECT_EQ(run_cli("run --pool /nonexistent/pool.csv --out-dir " + tmp("run_missing"), &out), 1);
  EXPECT_NE(out.find("/nonexistent/pool.csv"), std::string::npos);
}

TEST(Run, PoolTooSmallIsRuntimeFailure) {
  std::string out;
  EXPECT_EQ(run_cli("run --pool " + small_pool() + " --out-dir " + tmp("run_small"), &out), 1);
  EXPECT_NE(out.find("PoolExhausted"), std::string::npos);
}

TEST(Run, InvalidScenarioIsUsageError) {
  EXPECT_EQ(run_cli("run --pool " + small_pool() + " --aq 30 --out-dir " + tmp("run_bad")), 2);
  EXPECT_EQ(run_cli("run --pool " + small_pool() + " --strategy greedy --out-dir " + tmp("run_bad")), 2);
}

TEST(SweepAndReport, EndToEnd) {
  const auto cfg = tmp("sweep.cfg");
  write_text_file(cfg, "strategies = random, l2-select\nseeds = 0, 1\nmax_epochs = 5\n[tiny]\ninitial_size = 20\n"
                       "draw_size = 60\nbudget = 60\naq_size = 10, 20\n");
  const auto dir = tmp("sweep_out");
  fs::remove_all(dir);
  std::string out;
  ASSERT_EQ(run_cli("sweep --config " + cfg + " --pool " + small_pool() + " --out-dir " + dir, &out), 0) << out;
  const auto table = read_text_file(dir + "/table.csv");
  std::size_t lines = std::count(table.begin(), table.end(), '\n');
  EXPECT_EQ(lines, 1 + 2 * 2 * kMetricNames.size());
  EXPECT_TRUE(fs::exists(dir + "/tiny_aq10_l2-select_seed1/iterations.csv"));

  // table means equal recomputation from the per-run summaries
  double sum = 0;
  for (int seed : {0, 1}) {
    const auto s = nlohmann::json::parse(read_text_file(dir + "/tiny_aq10_random_seed" + std::to_string(seed) + "/summary.json"));
    sum += s["intersections"]["auc"].get<double>();
  }
  std::istringstream in(table);
  std::string line;
  bool found = false;
  while (std::getline(in, line))
    if (line.rfind("tiny,10,random,intersections,", 0) == 0) {
      const auto cells = split_list(line);
      EXPECT_NEAR(std::stod(cells[4]), sum / 2, 1e-12);
      found = true;
    }
  EXPECT_TRUE(found);

  // report over the aq 10 runs: 4 iterations x 2 strategies
  const auto report = tmp("curve.csv");
  ASSERT_EQ(run_cli("report --runs " + dir + "/tiny_aq10_random_seed0 " + dir + "/tiny_aq10_random_seed1 " + dir +
                        "/tiny_aq10_l2-select_seed0 --metric srocc --out " + report,
                    &out),
            0)
      << out;
  const auto curve = read_text_file(report);
  EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 1 + 4 * 2);
  const auto r0 = parse_iterations_csv(read_text_file(dir + "/tiny_aq10_random_seed0/iterations.csv"));
  const auto r1 = parse_iterations_csv(read_text_file(dir + "/tiny_aq10_random_seed1/iterations.csv"));
  std::istringstream cin(curve);
  std::getline(cin, line);
  std::getline(cin, line);
  const auto cells = split_list(line);
  EXPECT_EQ(cells[1], "random");
  EXPECT_NEAR(std::stod(cells[3]), (r0[0].srocc + r1[0].srocc) / 2, 1e-12);
  // the l2-select group has one run: stderr 0
  std::string last;
  while (std::getline(cin, line)) last = line;
  EXPECT_EQ(split_list(last)[4], "0");

  // mixing aq 10 (4 iterations) with aq 20 (2 iterations) is inconsistent
  EXPECT_EQ(run_cli("report --runs " + dir + "/tiny_aq10_random_seed0 " + dir + "/tiny_aq20_random_seed0 --metric srocc --out " +
                    tmp("bad.csv")),
            1);
  EXPECT_EQ(run_cli("report --runs " + dir + " --metric speed --out " + tmp("bad.csv")), 2);
}

TEST(Sweep, SingleRunHasZeroStderr) {
  const auto cfg = tmp("sweep1.cfg");
  write_text_file(cfg, "strategies = l2-reject\nseeds = 3\nmax_epochs = 5\ninitial_size = 20\ndraw_size = 60\nbudget = 60\n"
                       "aq_size = 20\n");
  const auto dir = tmp("sweep_single");
  ASSERT_EQ(run_cli("sweep --config " + cfg + " --pool " + small_pool() + " --out-dir " + dir), 0);
  std::istringstream in(read_text_file(dir + "/table.csv"));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto cells = split_list(line);
    EXPECT_EQ(cells[5], "0");
    EXPECT_EQ(cells[7], "0");
  }
}

TEST(Sweep, AllRunsFailingExitsOne) {
  const auto cfg = tmp("sweep_fail.cfg");
  write_text_file(cfg, "strategies = random\nseeds = 0\n[huge]\ninitial_size = 500\ndraw_size = 2000\nbudget = 1500\naq_size = 50\n");
  EXPECT_EQ(run_cli("sweep --config " + cfg + " --pool " + small_pool() + " --out-dir " + tmp("sweep_fail")), 1);
}
