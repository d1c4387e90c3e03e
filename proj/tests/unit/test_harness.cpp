#include <algorithm>
#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "rpcomb/error.hpp"
#include "rpcomb/harness.hpp"
#include "test_util.hpp"

namespace rpcomb {
namespace {

using testing::scratch_dir;
using testing::slurp;

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.source.sim = {1, 60, 10, 0};
  c.grid.knn_ks = {3};
  c.grid.enet_grid = {{0.5, 0.1}};
  c.grid.bagging_ntrees = {};
  c.grid.forest_ntrees = {};
  c.grid.boosting_ntrees = {10};
  c.m_sweep = {2};
  c.replications = 1;
  c.seed = 11;
  return c;
}

TEST(HarnessTest, SmokeRun) {
  const auto outcome = run_experiment(tiny_config());
  ASSERT_TRUE(outcome.failures.empty());
  ASSERT_EQ(outcome.runs.size(), 1u);
  const auto& run = outcome.runs[0];
  EXPECT_EQ(run.machines.size(), 3u);
  ASSERT_EQ(run.aggregators.size(), 2u);
  EXPECT_EQ(run.aggregators[0].method, "Comb_2");
  EXPECT_EQ(run.aggregators[1].method, "Comb_Full");
  for (const auto& a : run.aggregators) {
    EXPECT_TRUE(std::isfinite(a.rmse));
    EXPECT_GE(a.rmse, 0.0);
    EXPECT_GT(a.h, 0.0);
    EXPECT_LE(a.rmse, 10.0 * run.baseline_rmse);
  }
  EXPECT_EQ(run.aggregators[0].projection_seed, projection_seed(11, 0, 2));
}

TEST(HarnessTest, ReplicationReproducibleFromSeeds) {
  auto config = tiny_config();
  config.replications = 3;
  config.threads = 2;
  const auto outcome = run_experiment(config);
  ASSERT_EQ(outcome.runs.size(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(outcome.runs[r].replication, r);
    EXPECT_EQ(outcome.runs[r].seed, replication_seed(11, r));
    const auto again = run_replication(config, r);
    ASSERT_EQ(again.aggregators.size(), outcome.runs[r].aggregators.size());
    for (std::size_t k = 0; k < again.aggregators.size(); ++k) {
      EXPECT_EQ(again.aggregators[k].rmse, outcome.runs[r].aggregators[k].rmse);
      EXPECT_EQ(again.aggregators[k].h, outcome.runs[r].aggregators[k].h);
    }
  }
  EXPECT_NE(outcome.runs[0].aggregators[0].rmse, outcome.runs[1].aggregators[0].rmse);
}

TEST(HarnessTest, IdenticalConfigGivesIdenticalRunsFile) {
  const auto dir = scratch_dir();
  auto config = tiny_config();
  config.replications = 2;
  write_results(run_experiment(config), dir / "a");
  write_results(run_experiment(config), dir / "b");
  EXPECT_EQ(slurp(dir / "a" / "runs.csv"), slurp(dir / "b" / "runs.csv"));
  EXPECT_EQ(slurp(dir / "a" / "machines.csv"), slurp(dir / "b" / "machines.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "summary.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "timings.csv"));
  EXPECT_FALSE(std::filesystem::exists(dir / "a" / "failures.csv"));
}

TEST(HarnessTest, ResultFilesRoundTrip) {
  const auto dir = scratch_dir();
  auto config = tiny_config();
  config.replications = 2;
  const auto outcome = run_experiment(config);
  write_results(outcome, dir);
  const auto loaded = load_results(dir);
  const auto a = summarize(outcome.runs);
  const auto b = summarize(loaded);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].method, b[i].method);
    EXPECT_EQ(a[i].count, b[i].count);
    EXPECT_EQ(a[i].mean_rmse, b[i].mean_rmse);
    EXPECT_EQ(a[i].std_rmse, b[i].std_rmse);
    EXPECT_EQ(a[i].mean_seconds, b[i].mean_seconds);
  }
}

TEST(HarnessTest, FailedReplicationIsReportedNotFatal) {
  const auto dir = scratch_dir();
  {
    std::ofstream out(dir / "tiny.csv");
    out << "x,y\n";
    for (int i = 0; i < 6; ++i) out << i << "," << i * 2 << "\n";
  }
  auto config = tiny_config();
  config.source.kind = DataSource::Kind::kCsv;
  config.source.csv_path = dir / "tiny.csv";
  config.source.target = "y";
  config.grid.knn_ks = {1};
  config.grid.boosting_ntrees = {};
  config.replications = 2;
  const auto outcome = run_experiment(config);
  EXPECT_TRUE(outcome.runs.empty());
  ASSERT_EQ(outcome.failures.size(), 2u);
  EXPECT_EQ(outcome.failures[0].stage, "aggregate Comb_2");
  EXPECT_EQ(outcome.failures[0].kind, ErrorKind::kData);
  EXPECT_EQ(outcome.failures[1].seed, replication_seed(config.seed, 1));
  write_results(outcome, dir / "out");
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "failures.csv"));
}

RunResult mock_run(std::size_t r, std::vector<double> comb_rmse, double full_seconds,
                   double proj_seconds) {
  RunResult run;
  run.replication = r;
  run.aggregators.push_back({"Comb_2", 2, comb_rmse[0], proj_seconds, 1.0, 1, true, 0});
  run.aggregators.push_back({"Comb_Full", 0, comb_rmse[1], full_seconds, 1.0, 1, true, 0});
  return run;
}

TEST(SummaryTest, HandArithmetic) {
  const std::vector<RunResult> two{mock_run(0, {1.0, 2.0}, 9, 3), mock_run(1, {3.0, 2.0}, 9, 3)};
  const auto s = summarize(two);
  const auto comb2 = std::find_if(s.begin(), s.end(), [](auto& m) { return m.method == "Comb_2"; });
  ASSERT_NE(comb2, s.end());
  EXPECT_DOUBLE_EQ(comb2->mean_rmse, 2.0);
  EXPECT_DOUBLE_EQ(comb2->std_rmse, std::sqrt(2.0));
  EXPECT_FALSE(comb2->degenerate);

  const std::vector<RunResult> one{mock_run(0, {1.0, 2.0}, 9, 3)};
  for (const auto& m : summarize(one)) {
    EXPECT_EQ(m.std_rmse, 0.0);
    EXPECT_TRUE(m.degenerate);
  }
}

TEST(SummaryTest, MatchesRecomputationOverManyRuns) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::vector<RunResult> runs;
  std::vector<double> values;
  for (std::size_t r = 0; r < 30; ++r) {
    const double v = u(gen);
    values.push_back(v);
    runs.push_back(mock_run(r, {v, 1.0}, 1, 1));
  }
  double mean = 0;
  for (const double v : values) mean += v;
  mean /= 30;
  double ss = 0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  const auto s = summarize(runs);
  const auto comb2 = std::find_if(s.begin(), s.end(), [](auto& m) { return m.method == "Comb_2"; });
  EXPECT_NEAR(comb2->mean_rmse, mean, 1e-14);
  EXPECT_NEAR(comb2->std_rmse, std::sqrt(ss / 29), 1e-14);
}

TEST(SummaryTest, TimingRatios) {
  const std::vector<RunResult> runs{mock_run(0, {1, 1}, 9, 3), mock_run(1, {1, 1}, 9, 3)};
  const auto t = timing_report(runs);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].method, "Comb_2");
  EXPECT_DOUBLE_EQ(*t[0].full_ratio, 3.0);
  EXPECT_DOUBLE_EQ(t[0].median_seconds, 3.0);
  const std::vector<RunResult> equal{mock_run(0, {1, 1}, 2, 2)};
  for (const auto& row : timing_report(equal)) EXPECT_DOUBLE_EQ(*row.full_ratio, 1.0);
}

TEST(SummaryTest, BestAndWorstPerFamily) {
  RunResult run;
  run.machines = {{"knn_k2", Family::kKnn, 1.5},
                  {"knn_k3", Family::kKnn, 1.2},
                  {"bag_ntree18", Family::kBagging, 2.0}};
  auto best = best_machine_rmse(run);
  EXPECT_EQ(best[Family::kKnn], 1.2);
  EXPECT_EQ(best[Family::kBagging], 2.0);
  EXPECT_EQ(worst_machine_rmse(run)[Family::kKnn], 1.5);
  run.machines.push_back({"knn_k4", Family::kKnn, 9.0});
  EXPECT_EQ(best_machine_rmse(run)[Family::kKnn], 1.2);

  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  RunResult big;
  double loop_min = 1e300;
  for (int k = 0; k < 200; ++k) {
    const double v = u(gen);
    loop_min = std::min(loop_min, v);
    big.machines.push_back({"knn_k" + std::to_string(k + 2), Family::kKnn, v});
  }
  EXPECT_EQ(best_machine_rmse(big)[Family::kKnn], loop_min);
}

TEST(ConfigTest, PresetsAndValidation) {
  const auto reference = ExperimentConfig::reference(1);
  EXPECT_EQ(reference.grid.machine_count(), 1000u);
  EXPECT_EQ(reference.m_sweep.size(), 17u);
  EXPECT_EQ(reference.replications, 30u);
  EXPECT_EQ(reference.source.sim.n, 600u);
  const auto desk = ExperimentConfig::desk(5);
  EXPECT_EQ(desk.grid.machine_count(), 60u);
  EXPECT_EQ(desk.source.sim.n, 200u);
  EXPECT_EQ(desk.source.sim.d, 100u);
  EXPECT_NO_THROW(desk.validate());

  auto bad = desk;
  bad.m_sweep = {61};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = desk;
  bad.replications = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = desk;
  bad.source.kind = DataSource::Kind::kCsv;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(ConfigTest, SettingsOverrideInOrder) {
  ExperimentConfig c;
  apply_settings(c, {{"preset", "reference"}, {"model", "5"}, {"replications", "10"},
                     {"m_sweep", "2:4,100"}, {"tune", "grid"}, {"seed", "7"},
                     {"enet_alphas", "0,1"}, {"enet_lambdas", "log:0.01:1:3"}});
  EXPECT_EQ(c.source.sim.model_id, 5);
  EXPECT_EQ(c.source.sim.n, 800u);
  EXPECT_EQ(c.source.sim.d, 100u);
  EXPECT_EQ(c.replications, 10u);
  EXPECT_EQ(c.m_sweep, (std::vector<std::size_t>{2, 3, 4, 100}));
  EXPECT_EQ(c.tune, TuneMethod::kGrid);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.grid.enet_grid.size(), 6u);
  EXPECT_EQ(c.grid.knn_ks.size(), 200u);

  ExperimentConfig d;
  apply_settings(d, {{"preset", "desk"}, {"model", "2"}, {"n", "150"}, {"families", "knn,boosting"}});
  EXPECT_EQ(d.source.sim.n, 150u);
  EXPECT_EQ(d.source.sim.d, 30u);
  EXPECT_EQ(d.grid.machine_count(), 26u);

  EXPECT_THROW(apply_settings(d, {{"nonsense", "1"}}), ConfigError);
  EXPECT_THROW(apply_settings(d, {{"replications", "-3"}}), ConfigError);
  EXPECT_THROW(apply_settings(d, {{"preset", "huge"}}), ConfigError);
  EXPECT_THROW(apply_settings(d, {{"families", "svm"}}), ConfigError);
}

TEST(ConfigTest, ListParsing) {
  EXPECT_EQ(parse_size_list("2,3,10:12,100:300:100"),
            (std::vector<std::size_t>{2, 3, 10, 11, 12, 100, 200, 300}));
  EXPECT_THROW(parse_size_list("5:2"), ConfigError);
  EXPECT_THROW(parse_size_list("1:2:0"), ConfigError);
  const auto r = parse_real_list("0.5, log:1:100:3");
  ASSERT_EQ(r.size(), 4u);
  EXPECT_NEAR(r[2], 10.0, 1e-12);
  EXPECT_THROW(parse_real_list("abc"), ConfigError);
}

TEST(ConfigTest, SettingsFile) {
  const auto path = scratch_dir() / "exp.cfg";
  std::ofstream(path) << "# comment\npreset = desk\nmodel=3  # trailing\n\nreplications=2\n";
  const auto s = read_settings_file(path);
  EXPECT_EQ(s.at("preset"), "desk");
  EXPECT_EQ(s.at("model"), "3");
  EXPECT_EQ(s.at("replications"), "2");
  std::ofstream(path) << "no equals sign\n";
  EXPECT_THROW(read_settings_file(path), ConfigError);
  EXPECT_THROW(read_settings_file(path.parent_path() / "missing.cfg"), ConfigError);
}

}  // namespace
}  // namespace rpcomb
