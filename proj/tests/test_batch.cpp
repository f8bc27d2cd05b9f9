#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "hfdrl/batch.hpp"

using namespace hfdrl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream f(p);
  for (std::string l; std::getline(f, l);) out.push_back(l);
  return out;
}

ExperimentConfig tiny(const fs::path& dir) {
  ExperimentConfig c;
  c.sim.population.cartpole_agents = 1;
  c.sim.population.acrobot_agents = 1;
  c.sim.population.target = 1;
  c.sim.population.hidden = {8, 8};
  c.sim.termination.max_rounds = 2;
  c.sim.termination.loss_tolerance = 1e-12;
  c.sim.similarity.eval_episodes = 1;
  c.seeds = {1};
  c.modes = {Mode::Hfdrl, Mode::NonCoop};
  c.output_dir = dir.string();
  return c;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hfdrl_test_batch_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(RunBatch, RowCountsPerMode) {
  const auto dir = scratch_dir("rows");
  ASSERT_EQ(run_batch(tiny(dir)), 0);
  const auto rows = lines(dir / "rounds.csv");
  ASSERT_EQ(rows.size(), 1u + 2u * 4u);
  EXPECT_EQ(rows[0], "mode,sweep_value,seed,round,agent,return,loss,selected,W,ul_delay,dl_delay,deadline_met");
  std::size_t hfdrl = 0, noncoop = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    hfdrl += rows[i].rfind("hfdrl,", 0) == 0;
    noncoop += rows[i].rfind("noncoop,", 0) == 0;
  }
  EXPECT_EQ(hfdrl, 4u);
  EXPECT_EQ(noncoop, 4u);
  EXPECT_EQ(lines(dir / "summary.csv").size(), 3u);
  EXPECT_TRUE(fs::exists(dir / "config.ini"));
  EXPECT_TRUE(fs::exists(dir / "wireless.csv"));
  EXPECT_TRUE(fs::exists(dir / "return_curves.dat"));
  EXPECT_TRUE(fs::exists(dir / "kg" / "hfdrl_s1" / "kg_1.csv"));
  EXPECT_FALSE(fs::exists(dir / "kg" / "noncoop_s1"));
  EXPECT_TRUE(parse_config(slurp(dir / "config.ini")) == tiny(dir));
  fs::remove_all(dir);
}

TEST(RunBatch, SweepCardinality) {
  const auto dir = scratch_dir("sweep");
  ExperimentConfig c = tiny(dir);
  c.seeds = {1, 2};
  c.sim.termination.max_rounds = 1;
  const SweepSpec s = parse_sweep("rb_count=27,54,135");
  ASSERT_EQ(run_batch(c, s), 0);
  const auto rows = lines(dir / "summary.csv");
  ASSERT_EQ(rows.size(), 1u + 2u * 3u * 2u);
  std::set<std::string> keys;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto a = rows[i].find(',');
    const auto b = rows[i].find(',', a + 1);
    const auto d = rows[i].find(',', b + 1);
    keys.insert(rows[i].substr(0, d));
  }
  EXPECT_EQ(keys.size(), 12u);
  EXPECT_TRUE(keys.count("hfdrl,27,1"));
  EXPECT_TRUE(keys.count("noncoop,135,2"));
  EXPECT_TRUE(fs::exists(dir / "sweep_rb_count.dat"));
  fs::remove_all(dir);
}

TEST(RunBatch, RepeatedInvocationIsByteIdentical) {
  const auto a = scratch_dir("det_a");
  const auto b = scratch_dir("det_b");
  ExperimentConfig ca = tiny(a), cb = tiny(b);
  ca.sim.threads = cb.sim.threads = 1;
  ASSERT_EQ(run_batch(ca), 0);
  ASSERT_EQ(run_batch(cb), 0);
  for (const char* f : {"rounds.csv", "summary.csv", "wireless.csv", "return_curves.dat"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_EQ(slurp(a / "kg" / "hfdrl_s1" / "kg_2.csv"), slurp(b / "kg" / "hfdrl_s1" / "kg_2.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(RunBatch, WorkerCountDoesNotChangeOutputs) {
  const auto a = scratch_dir("w1");
  const auto b = scratch_dir("w4");
  ExperimentConfig ca = tiny(a), cb = tiny(b);
  ca.seeds = cb.seeds = {1, 2, 3};
  ca.sim.threads = 1;
  cb.sim.threads = 4;
  ASSERT_EQ(run_batch(ca), 0);
  ASSERT_EQ(run_batch(cb), 0);
  for (const char* f : {"rounds.csv", "summary.csv", "wireless.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(RunBatch, UnwritableOutputIsIoError) {
  const auto blocker = scratch_dir("blocker");
  { std::ofstream(blocker) << "x"; }
  EXPECT_THROW(run_batch(tiny(blocker / "sub")), IoError);
  fs::remove_all(blocker);
}

TEST(BatchSeeds, RepetitionsDeriveDistinctSeeds) {
  ExperimentConfig c;
  c.seeds = {1, 2};
  SweepSpec s{"alpha", {0.5}, 3};
  const auto seeds = batch_seeds(c, s);
  ASSERT_EQ(seeds.size(), 6u);
  EXPECT_EQ(seeds[0], 1u);
  EXPECT_EQ(seeds[3], 2u);
  EXPECT_EQ(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size(), 6u);
}
