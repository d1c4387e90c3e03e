// Runs the rpcomb executable end to end and checks files and exit codes.
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "rpcomb/datamodel.hpp"
#include "test_util.hpp"

#ifdef RPCOMB_CLI_PATH

namespace rpcomb {
namespace {

using testing::scratch_dir;
using testing::slurp;

int run(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd =
      std::string(RPCOMB_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, BoundPrintsJson) {
  const auto dir = scratch_dir();
  ASSERT_EQ(run("bound --R0 0.5 --n 1000 --delta 0.05 --h 1 --epsilon 0.1", dir / "out.json"), 0);
  const auto j = nlohmann::json::parse(slurp(dir / "out.json"));
  EXPECT_EQ(j.at("min_m").get<long long>(), 50742);
  EXPECT_NEAR(j.at("C1").get<double>(), 48.0, 1e-12);
}

TEST(CliTest, PipelineSimulateMachinesProjectAggregate) {
  const auto dir = scratch_dir();
  const auto d = dir.string();
  ASSERT_EQ(run("simulate --model 1 --n 80 --seed 3 --out " + d + "/build.csv", dir / "log"), 0);
  ASSERT_EQ(run("simulate --model 1 --n 40 --seed 4 --out " + d + "/agg.csv", dir / "log"), 0);
  ASSERT_EQ(run("simulate --model 1 --n 30 --seed 5 --out " + d + "/test.csv", dir / "log"), 0);
  ASSERT_EQ(run("machines --build " + d + "/build.csv --target Y --predict " + d +
                    "/agg.csv --out " + d + "/agg_pred.csv --predict " + d + "/test.csv --out " +
                    d + "/test_pred.csv --seed 1",
                dir / "log"),
            0)
      << slurp(dir / "log");
  const auto pm = load_prediction_csv(dir / "agg_pred.csv");
  EXPECT_EQ(pm.rows(), 40u);
  EXPECT_EQ(pm.machines(), 60u);

  ASSERT_EQ(run("project --in " + d + "/agg_pred.csv --m 5 --seed 2 --out " + d + "/proj.csv",
                dir / "log"),
            0);
  EXPECT_EQ(load_prediction_csv(dir / "proj.csv").machines(), 5u);

  ASSERT_EQ(run("aggregate --features " + d + "/agg_pred.csv --responses " + d +
                    "/agg.csv --target Y --queries " + d + "/test_pred.csv --truth " + d +
                    "/test.csv --m 5 --seed 2 --out " + d + "/pred.csv --save-model " + d +
                    "/model.json",
                dir / "agg.json"),
            0)
      << slurp(dir / "agg.json");
  const auto j = nlohmann::json::parse(slurp(dir / "agg.json"));
  EXPECT_GT(j.at("h").get<double>(), 0.0);
  EXPECT_TRUE(std::isfinite(j.at("rmse").get<double>()));
  EXPECT_TRUE(std::filesystem::exists(dir / "model.json"));

  ASSERT_EQ(run("aggregate --features " + d + "/agg_pred.csv --responses " + d +
                    "/agg.csv --target Y --full --h 2.5",
                dir / "full.json"),
            0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "full.json")).at("h").get<double>(), 2.5);
}

TEST(CliTest, ExperimentAndSummarize) {
  const auto dir = scratch_dir();
  const auto cfg = dir / "exp.cfg";
  std::ofstream(cfg) << "preset=desk\nmodel=1\nn=80\nreplications=2\nm_sweep=2,5\n";
  ASSERT_EQ(run("experiment --config " + cfg.string() + " --seed 3 --out " + (dir / "r").string(),
                dir / "log"),
            0)
      << slurp(dir / "log");
  for (const char* f : {"runs.csv", "machines.csv", "timings.csv", "summary.csv", "summary.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "r" / f)) << f;
  }
  std::filesystem::remove(dir / "r" / "summary.csv");
  ASSERT_EQ(run("summarize --in " + (dir / "r").string(), dir / "log"), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "r" / "summary.csv"));
}

TEST(CliTest, ExitCodes) {
  const auto dir = scratch_dir();
  EXPECT_EQ(run("experiment --preset bogus --out " + dir.string(), dir / "log"), 2);
  EXPECT_EQ(run("bound --epsilon -1", dir / "log"), 2);
  EXPECT_EQ(run("no-such-command", dir / "log"), 2);
  EXPECT_EQ(run("project --in " + dir.string() + "/missing.csv --m 2 --out x.csv", dir / "log"), 3);
  EXPECT_EQ(run("bound --h 1e-6 --R0 10", dir / "log"), 4);
  std::ofstream(dir / "bad.csv") << "a,y\n1,2\nfoo,3\n";
  EXPECT_EQ(run("machines --build " + dir.string() + "/bad.csv --target y --predict " +
                    dir.string() + "/bad.csv --out " + dir.string() + "/p.csv",
                dir / "log"),
            3);
}

}  // namespace
}  // namespace rpcomb

#endif  // RPCOMB_CLI_PATH
