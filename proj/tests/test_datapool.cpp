#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <numeric>
#include <set>

#include "dado/datapool.hpp"
#include "dado/oracle.hpp"

namespace fs = std::filesystem;
using namespace dado;

namespace {

std::string write_tmp(const std::string& name, const std::string& content) {
  fs::create_directories(DADO_TEST_TMP);
  const auto path = (fs::path(DADO_TEST_TMP) / name).string();
  write_text_file(path, content);
  return path;
}

CandidatePool small_pool(std::size_t n, std::uint64_t seed = 1) {
  SyntheticPoolSpec spec;
  spec.n = n;
  spec.d = 3;
  spec.seed = seed;
  return gen_synthetic_pool(spec);
}

std::set<std::size_t> ids_of(const std::vector<DesignCandidate>& cs) {
  std::set<std::size_t> s;
  for (const auto& c : cs) s.insert(c.id);
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::Io;
}

}  // namespace

TEST(LoadPool, MinimalWellFormedFile) {
  const auto path = write_tmp("three.csv", "p0,p1,j0,j1\n0,1,2,3\n0.5,0.25,1e-3,4\n1,0,5,6\n");
  const auto pool = load_pool(path, 2, 2);
  EXPECT_EQ(pool.size(), 3u);
  EXPECT_EQ(pool.available(), 3u);
  EXPECT_EQ(pool.at(1).params, (std::vector<double>{0.5, 0.25}));
  EXPECT_EQ(*pool.at(1).true_objectives, (ObjectiveVector{1e-3, 4}));
  EXPECT_EQ(pool.feature_bounds()[0].min, 0.0);
  EXPECT_EQ(pool.feature_bounds()[0].max, 1.0);
}

TEST(LoadPool, NanCellNamesTheRow) {
  const auto path = write_tmp("nan.csv", "p0,p1,j0,j1\n0,1,2,3\n0,NaN,2,3\n");
  try {
    load_pool(path, 2, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteValue);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(LoadPool, InfIsRejected) {
  const auto path = write_tmp("inf.csv", "p0,j0\n1,inf\n");
  EXPECT_EQ(kind_of([&] { load_pool(path, 1, 1); }), ErrorKind::NonFiniteValue);
}

TEST(LoadPool, SchemaAndFileErrors) {
  EXPECT_EQ(kind_of([] { load_pool("/nonexistent/pool.csv", 2, 2); }), ErrorKind::MissingFile);
  const auto wide = write_tmp("wide.csv", "p0,p1,j0,j1\n0,1,2\n");
  EXPECT_EQ(kind_of([&] { load_pool(wide, 2, 2); }), ErrorKind::SchemaMismatch);
  const auto header_only = write_tmp("header.csv", "p0,p1,j0,j1\n");
  EXPECT_EQ(kind_of([&] { load_pool(header_only, 2, 2); }), ErrorKind::SchemaMismatch);
  const auto text = write_tmp("text.csv", "p0,j0\nabc,1\n");
  EXPECT_EQ(kind_of([&] { load_pool(text, 1, 1); }), ErrorKind::SchemaMismatch);
}

TEST(LoadPool, TwentyEightParameterPool) {
  SyntheticPoolSpec spec;
  spec.n = 20;
  spec.d = 28;
  const auto path = write_tmp("ubend_shape.csv", pool_to_csv(gen_synthetic_pool(spec)));
  const auto pool = load_pool(path, 28, 2);
  EXPECT_EQ(pool.dim(), 28u);
  EXPECT_EQ(pool.num_obj(), 2u);
}

TEST(InitialSample, ExhaustiveDraw) {
  auto pool = small_pool(5);
  Rng rng(3);
  const auto picked = pool.initial_sample(5, rng);
  EXPECT_EQ(ids_of(picked).size(), 5u);
  EXPECT_EQ(pool.available(), 0u);
}

TEST(InitialSample, DeterministicUnderSeed) {
  auto a = small_pool(1000);
  auto b = small_pool(1000);
  Rng r1(42), r2(42);
  const auto sa = a.initial_sample(100, r1);
  const auto sb = b.initial_sample(100, r2);
  EXPECT_EQ(ids_of(sa), ids_of(sb));
  EXPECT_EQ(ids_of(sa).size(), 100u);
  EXPECT_EQ(a.available(), 900u);
}

TEST(InitialSample, TooLargeIsPoolExhausted) {
  auto pool = small_pool(5);
  Rng rng(1);
  EXPECT_EQ(kind_of([&] { pool.initial_sample(6, rng); }), ErrorKind::PoolExhausted);
  EXPECT_EQ(pool.available(), 5u);
}

TEST(BootstrapDraw, DrawsAllAvailableAndDoesNotConsume) {
  auto pool = small_pool(5);
  const std::vector<std::size_t> used{0, 2};
  pool.consume(used);
  Rng rng(9);
  const auto d = pool.bootstrap_draw(3, rng);
  EXPECT_EQ(ids_of(d), (std::set<std::size_t>{1, 3, 4}));
  EXPECT_EQ(pool.available(), 3u);
  EXPECT_EQ(kind_of([&] { pool.bootstrap_draw(4, rng); }), ErrorKind::PoolExhausted);
}

TEST(BootstrapDraw, SeedDeterminism) {
  const auto pool = small_pool(1000);
  Rng a(5), b(5), c(6);
  const auto da = ids_of(pool.bootstrap_draw(400, a));
  EXPECT_EQ(da, ids_of(pool.bootstrap_draw(400, b)));
  EXPECT_NE(da, ids_of(pool.bootstrap_draw(400, c)));
  EXPECT_EQ(da.size(), 400u);
}

TEST(BootstrapDraw, NeverReturnsConsumedCandidates) {
  auto pool = small_pool(200);
  std::vector<std::size_t> half;
  for (std::size_t i = 0; i < 200; i += 2) half.push_back(i);
  pool.consume(half);
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep)
    for (const auto& c : pool.bootstrap_draw(60, rng)) ASSERT_FALSE(pool.is_consumed(c.id)) << c.id;
}

TEST(Consume, AccountingAndErrors) {
  auto pool = small_pool(100);
  std::vector<std::size_t> ids(25);
  std::iota(ids.begin(), ids.end(), std::size_t{10});
  pool.consume(ids);
  EXPECT_EQ(pool.available(), 75u);
  EXPECT_EQ(pool.available() + pool.consumed_count(), pool.size());

  pool.consume(std::vector<std::size_t>{});
  EXPECT_EQ(pool.available(), 75u);

  EXPECT_EQ(kind_of([&] { pool.consume(std::vector<std::size_t>{10}); }), ErrorKind::AlreadyConsumed);
  EXPECT_EQ(kind_of([&] { pool.consume(std::vector<std::size_t>{500}); }), ErrorKind::UnknownId);
  EXPECT_EQ(kind_of([&] { pool.consume(std::vector<std::size_t>{1, 1}); }), ErrorKind::AlreadyConsumed);
  // failed calls leave the pool untouched
  EXPECT_EQ(pool.available(), 75u);
  EXPECT_FALSE(pool.is_consumed(1));
}

TEST(Normalizers, PopulationZScore) {
  const std::vector<ObjectiveVector> ys{{0, 0}, {2, 2}};
  const auto t = TargetNormalizer::fit(ys);
  EXPECT_DOUBLE_EQ(t.mean()[0], 1.0);
  EXPECT_DOUBLE_EQ(t.mean()[1], 1.0);
  EXPECT_DOUBLE_EQ(t.stddev()[0], 1.0);
  EXPECT_DOUBLE_EQ(t.stddev()[1], 1.0);
  EXPECT_EQ(t.apply(std::vector<double>{2, 0}), (ObjectiveVector{1, -1}));
}

TEST(Normalizers, ConstantObjectiveMapsToZero) {
  const std::vector<ObjectiveVector> ys{{3, 1}, {3, 2}, {3, 4}};
  const auto t = TargetNormalizer::fit(ys);
  for (const auto& y : ys) EXPECT_EQ(t.apply(y)[0], 0.0);
  EXPECT_EQ(t.stddev()[0], TargetNormalizer::kStdFloor);
}

TEST(Normalizers, RefitTracksGrowingTrainingSet) {
  auto pool = small_pool(300);
  std::vector<ObjectiveVector> ys;
  std::vector<double> prev_mean;
  for (std::size_t n = 0; n < 300; n += 50) {
    for (std::size_t k = n; k < n + 50; ++k) ys.push_back(*pool.at(k).true_objectives);
    const auto norms = fit_normalizers(pool, ys);
    // direct summation
    for (std::size_t j = 0; j < 2; ++j) {
      long double s = 0, ss = 0;
      for (const auto& y : ys) s += y[j];
      const long double mean = s / ys.size();
      for (const auto& y : ys) ss += (y[j] - mean) * (y[j] - mean);
      EXPECT_NEAR(norms.targets.mean()[j], static_cast<double>(mean), 1e-12);
      EXPECT_NEAR(norms.targets.stddev()[j], std::sqrt(static_cast<double>(ss / ys.size())), 1e-12);
    }
    if (!prev_mean.empty()) {
      EXPECT_NE(prev_mean, norms.targets.mean());
    }
    prev_mean = norms.targets.mean();
  }
}

TEST(Normalizers, FeaturesMapIntoUnitInterval) {
  const auto pool = small_pool(500);
  const FeatureNormalizer f(pool.feature_bounds());
  for (const auto& c : pool.candidates())
    for (double v : f.apply(c.params)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  const FeatureNormalizer constant({{2.0, 2.0}});
  EXPECT_EQ(constant.apply(std::vector<double>{2.0})[0], 0.5);
  EXPECT_THROW(f.apply(std::vector<double>{1.0}), Error);
}

TEST(Normalizers, InverseRoundTrip) {
  const TargetNormalizer t({1, 1}, {2, 2});
  EXPECT_EQ(t.invert(std::vector<double>{0, 0}), (ObjectiveVector{1, 1}));
  const std::vector<double> y{3.5, -7.25};
  const auto back = t.invert(t.apply(y));
  EXPECT_DOUBLE_EQ(back[0], y[0]);
  EXPECT_DOUBLE_EQ(back[1], y[1]);
}

TEST(CandidatePool, RejectsInvalidCandidates) {
  std::vector<DesignCandidate> rows{{0, {1.0, std::nan("")}, ObjectiveVector{0, 0}}};
  EXPECT_EQ(kind_of([&] { CandidatePool(rows, 2, 2); }), ErrorKind::NonFiniteValue);
  std::vector<DesignCandidate> bad_obj{{0, {1.0, 2.0}, ObjectiveVector{0}}};
  EXPECT_EQ(kind_of([&] { CandidatePool(bad_obj, 2, 2); }), ErrorKind::SchemaMismatch);
}
