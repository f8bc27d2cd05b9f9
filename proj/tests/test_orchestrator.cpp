#include <gtest/gtest.h>

#include <cmath>

#include "hfdrl/orchestrator.hpp"

using namespace hfdrl;

namespace {

SimulationConfig small_config(Mode mode, std::size_t rounds) {
  SimulationConfig cfg;
  cfg.mode = mode;
  cfg.population.cartpole_agents = 2;
  cfg.population.acrobot_agents = 2;
  cfg.population.target = 2;
  cfg.population.hidden = {16, 16};
  cfg.termination.max_rounds = rounds;
  cfg.termination.loss_tolerance = 1e-12;
  cfg.similarity.eval_episodes = 1;
  cfg.similarity.lambda = 0.0;
  return cfg;
}

bool same_logs(const ExperimentResult& a, const ExperimentResult& b) {
  if (a.rounds.size() != b.rounds.size()) return false;
  for (std::size_t r = 0; r < a.rounds.size(); ++r) {
    const auto& x = a.rounds[r];
    const auto& y = b.rounds[r];
    if (x.global_loss != y.global_loss || x.solo != y.solo || x.kg.size() != y.kg.size()) return false;
    for (std::size_t i = 0; i < x.agents.size(); ++i) {
      const auto& p = x.agents[i];
      const auto& q = y.agents[i];
      if (p.episode_return != q.episode_return || p.loss != q.loss || p.weight != q.weight ||
          p.ul_rbs != q.ul_rbs || p.dl_rbs != q.dl_rbs || p.aggregated != q.aggregated)
        return false;
    }
    for (std::size_t e = 0; e < x.kg.size(); ++e)
      if (x.kg[e].edge.mu != y.kg[e].edge.mu) return false;
  }
  return a.final_mean_return == b.final_mean_return;
}

}  // namespace

TEST(CheckTermination, ConstantLossStopsAtRoundTwo) {
  TerminationCriterion t{1e-3, 100};
  std::vector<double> h{0.5};
  EXPECT_EQ(check_termination(h, t), Termination::Continue);
  h.push_back(0.5);
  EXPECT_EQ(check_termination(h, t), Termination::Stop);
}

TEST(CheckTermination, OscillatingLossRunsToCap) {
  TerminationCriterion t{1e-3, 50};
  std::vector<double> h;
  for (std::size_t m = 1; m <= 50; ++m) {
    h.push_back(m % 2 ? 1.0 : 0.0);
    EXPECT_EQ(check_termination(h, t), m == 50 ? Termination::Stop : Termination::Continue);
  }
}

TEST(CheckTermination, MatchesDirectReevaluation) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    TerminationCriterion t{uniform(rng, 1e-4, 0.2), 1 + static_cast<std::size_t>(uniform(rng, 0, 30))};
    std::vector<double> h;
    for (int m = 0; m < 40; ++m) {
      h.push_back(uniform(rng, 0.0, 1.0));
      const bool stop = h.size() >= t.max_rounds ||
                        (h.size() >= 2 && std::fabs(h[h.size() - 1] - h[h.size() - 2]) < t.loss_tolerance);
      EXPECT_EQ(check_termination(h, t) == Termination::Stop, stop);
    }
  }
}

TEST(GlobalLoss, Examples) {
  EXPECT_EQ(global_loss({2.5}, {1.0}), 2.5);
  EXPECT_NEAR(global_loss({3.0, 3.0, 3.0}, {0.2, 0.3, 0.5}), 3.0, 1e-15);
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> l(5), w(5);
    double ref = 0.0;
    for (int i = 0; i < 5; ++i) {
      l[i] = uniform(rng, -5, 5);
      w[i] = uniform(rng, 0, 1);
      ref += l[i] * w[i];
    }
    EXPECT_NEAR(global_loss(l, w), ref, 1e-12);
  }
  EXPECT_THROW(global_loss({1.0}, {0.5, 0.5}), ShapeError);
}

TEST(Simulation, SingleAgentIsPureLocalTraining) {
  SimulationConfig cfg = small_config(Mode::Hfdrl, 5);
  cfg.population.cartpole_agents = 0;
  cfg.population.acrobot_agents = 1;
  cfg.population.target = 0;
  const auto res = run_experiment(cfg, 1);
  ASSERT_EQ(res.rounds.size(), 5u);
  for (const auto& r : res.rounds) {
    EXPECT_TRUE(r.solo);
    EXPECT_TRUE(r.kg.empty());
    EXPECT_FALSE(r.agents[0].selected);
  }
}

TEST(Simulation, NonCoopHasNoTraffic) {
  const auto res = run_experiment(small_config(Mode::NonCoop, 4), 2);
  for (const auto& r : res.rounds) {
    EXPECT_TRUE(r.solo);
    EXPECT_TRUE(r.kg.empty());
    for (const auto& a : r.agents) {
      EXPECT_EQ(a.ul_rbs + a.dl_rbs, 0u);
      EXPECT_FALSE(a.selected);
      EXPECT_FALSE(a.aggregated);
    }
  }
}

TEST(Simulation, RespectsRoundCap) {
  for (std::size_t cap : {1u, 3u}) EXPECT_LE(run_experiment(small_config(Mode::Hfdrl, cap), 3).rounds.size(), cap);
}

TEST(Simulation, ThresholdAboveEveryMuMeansSolo) {
  SimulationConfig cfg = small_config(Mode::Hfdrl, 3);
  cfg.similarity.lambda = 1.01;
  const auto res = run_experiment(cfg, 4);
  for (const auto& r : res.rounds) {
    EXPECT_TRUE(r.solo);
    EXPECT_EQ(r.kg.size(), 3u);
    for (const auto& e : r.kg) EXPECT_FALSE(e.edge.selected);
  }
}

TEST(Simulation, ZeroThresholdSelectsEverySource) {
  SimulationConfig cfg = small_config(Mode::Hfdrl, 2);
  cfg.wireless.deadline_s = 1.0;  // every link meets it
  const auto res = run_experiment(cfg, 5);
  for (const auto& r : res.rounds) {
    EXPECT_FALSE(r.solo);
    for (const auto& a : r.agents) {
      EXPECT_TRUE(a.selected);
      EXPECT_TRUE(a.aggregated);
    }
    double w = 0.0;
    for (const auto& a : r.agents) w += a.weight;
    EXPECT_NEAR(w, 1.0, 1e-12);
  }
}

TEST(Simulation, HomogeneousNeverCrossesEnvironments) {
  SimulationConfig cfg = small_config(Mode::Homogeneous, 4);
  cfg.population.target_mode = TargetMode::RoundRobin;
  const auto res = run_experiment(cfg, 6);
  for (const auto& r : res.rounds) {
    const EnvKind env = r.agents[r.target].env;
    for (const auto& a : r.agents)
      if (a.selected) EXPECT_EQ(a.env, env);
    EXPECT_TRUE(r.kg.empty());
  }
}

TEST(Simulation, RandomSelectMatchesHfdrlCardinality) {
  SimulationConfig h = small_config(Mode::Hfdrl, 3);
  h.similarity.lambda = 0.6;
  SimulationConfig r = h;
  r.mode = Mode::RandomSelect;
  Simulation hs(h, 7), rs(r, 7);
  // round one sees identical agents, so both modes compute the same mu
  const auto hl = hs.run_round();
  const auto rl = rs.run_round();
  std::size_t hn = 0, rn = 0;
  for (const auto& a : hl.agents) hn += a.selected;
  for (const auto& a : rl.agents) rn += a.selected;
  EXPECT_EQ(hn, rn);
}

TEST(Simulation, AgentLevelsAlternateWithinEnvironment) {
  SimulationConfig cfg = small_config(Mode::Hfdrl, 1);
  const Simulation sim(cfg, 1);
  const auto& a = sim.agents();
  EXPECT_EQ(a[0].level, 1);
  EXPECT_EQ(a[1].level, 2);
  EXPECT_EQ(a[2].level, 1);
  EXPECT_EQ(a[3].level, 2);
  EXPECT_EQ(a[1].params.layers[0].weights.rows(), 8);
  EXPECT_EQ(a[0].env.kind, EnvKind::CartPole);
  EXPECT_EQ(a[2].env.kind, EnvKind::Acrobot);
}

TEST(Simulation, RoundLogSchemaPopulated) {
  const auto res = run_experiment(small_config(Mode::Hfdrl, 2), 8);
  for (const auto& r : res.rounds) {
    EXPECT_EQ(r.agents.size(), 4u);
    EXPECT_EQ(r.target, 2u);
    EXPECT_EQ(r.kg.size(), 3u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r.agents[i].agent, i);
    for (const auto& e : r.kg) {
      EXPECT_EQ(e.src, 2u);
      EXPECT_GE(e.edge.semantic_norm, 0.0);
      EXPECT_LE(e.edge.semantic_norm, 1.0);
    }
    EXPECT_TRUE(std::isfinite(r.global_loss));
  }
  EXPECT_EQ(res.final_mean_return.size(), 4u);
}

TEST(Simulation, SeededRunsAreReproducible) {
  const auto cfg = small_config(Mode::Hfdrl, 3);
  EXPECT_TRUE(same_logs(run_experiment(cfg, 11), run_experiment(cfg, 11)));
  EXPECT_FALSE(same_logs(run_experiment(cfg, 11), run_experiment(cfg, 12)));
}

TEST(Simulation, ThreadCountDoesNotChangeResults) {
  auto cfg = small_config(Mode::Hfdrl, 3);
  const auto serial = run_experiment(cfg, 13);
  cfg.threads = 4;
  EXPECT_TRUE(same_logs(serial, run_experiment(cfg, 13)));
}

TEST(Simulation, FinalMeanIsTrailingWindowAverage) {
  auto cfg = small_config(Mode::NonCoop, 6);
  cfg.final_window = 4;
  const auto res = run_experiment(cfg, 14);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto c = res.return_curve(i);
    EXPECT_NEAR(res.final_mean_return[i], (c[2] + c[3] + c[4] + c[5]) / 4.0, 1e-12);
  }
}

TEST(SimulationConfig, ValidationRejectsBadValues) {
  SimulationConfig cfg;
  cfg.population.target = 10;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = SimulationConfig{};
  cfg.termination.max_rounds = 0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = SimulationConfig{};
  cfg.similarity.alpha = -0.1;
  EXPECT_THROW(cfg.validate(), DomainError);
}
